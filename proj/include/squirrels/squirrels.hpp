#pragma once

#include "squirrels/analysis.hpp"
#include "squirrels/benchmark.hpp"
#include "squirrels/bessel.hpp"
#include "squirrels/config.hpp"
#include "squirrels/coupling_fit.hpp"
#include "squirrels/error.hpp"
#include "squirrels/forward.hpp"
#include "squirrels/io.hpp"
#include "squirrels/ladder.hpp"
#include "squirrels/parallel.hpp"
#include "squirrels/rabbitt.hpp"
#include "squirrels/reconstruction.hpp"
#include "squirrels/spectra.hpp"
