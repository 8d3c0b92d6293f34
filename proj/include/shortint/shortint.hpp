#pragma once

#include "shortint/error.hpp"
#include "shortint/numeric.hpp"
#include "shortint/parallel.hpp"
#include "shortint/primes.hpp"
#include "shortint/sieve.hpp"
#include "shortint/segment_cache.hpp"
#include "shortint/zeta.hpp"
#include "shortint/multfun.hpp"
#include "shortint/shortwin.hpp"
#include "shortint/restrict.hpp"
#include "shortint/dirichlet.hpp"
#include "shortint/report.hpp"
#include "shortint/config.hpp"
#include "shortint/experiment.hpp"
