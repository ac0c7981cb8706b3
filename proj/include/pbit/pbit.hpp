#pragma once

#include "pbit/apt.hpp"
#include "pbit/bench.hpp"
#include "pbit/coloring.hpp"
#include "pbit/error.hpp"
#include "pbit/fixed_point.hpp"
#include "pbit/gf2.hpp"
#include "pbit/instance.hpp"
#include "pbit/ising.hpp"
#include "pbit/parallel.hpp"
#include "pbit/rng.hpp"
#include "pbit/sampler.hpp"
#include "pbit/validate.hpp"
