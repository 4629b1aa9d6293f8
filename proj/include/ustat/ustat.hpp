#pragma once

#include "ustat/array.hpp"
#include "ustat/bounds.hpp"
#include "ustat/error.hpp"
#include "ustat/index.hpp"
#include "ustat/io.hpp"
#include "ustat/kernel.hpp"
#include "ustat/montecarlo.hpp"
#include "ustat/norms.hpp"
#include "ustat/partition.hpp"
#include "ustat/poisson.hpp"
#include "ustat/rng.hpp"
#include "ustat/stats.hpp"
