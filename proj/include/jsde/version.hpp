#pragma once

#define JSDE_VERSION_STRING "0.1.0"
