#pragma once

// Umbrella header for the whole library.

#include "protosent/batching.hpp"
#include "protosent/checkpoint.hpp"
#include "protosent/config.hpp"
#include "protosent/data.hpp"
#include "protosent/errors.hpp"
#include "protosent/evaluation.hpp"
#include "protosent/gradcheck.hpp"
#include "protosent/harness.hpp"
#include "protosent/metrics.hpp"
#include "protosent/model.hpp"
#include "protosent/ops.hpp"
#include "protosent/optimizer.hpp"
#include "protosent/rng.hpp"
#include "protosent/svg.hpp"
#include "protosent/tensor.hpp"
#include "protosent/trainer.hpp"
