#pragma once

// Every translation unit must configure cpp-httplib identically or the
// inline class layouts diverge. Include this header instead of <httplib.h>.
#ifdef SDOH_HTTPLIB_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
