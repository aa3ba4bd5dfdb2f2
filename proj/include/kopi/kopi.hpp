#pragma once

#include "kopi/core.hpp"
#include "kopi/rng.hpp"
#include "kopi/parallel.hpp"
#include "kopi/simgen.hpp"
#include "kopi/lasso.hpp"
#include "kopi/knockoffs.hpp"
#include "kopi/pistats.hpp"
#include "kopi/jer.hpp"
#include "kopi/null_cache.hpp"
#include "kopi/inference.hpp"
#include "kopi/dataset.hpp"
#include "kopi/bench.hpp"
