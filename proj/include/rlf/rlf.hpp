#pragma once

// Umbrella header for the Residual Likelihood Forests library.

#include "rlf/common.hpp"
#include "rlf/rng.hpp"
#include "rlf/dataset.hpp"
#include "rlf/math.hpp"
#include "rlf/model.hpp"
#include "rlf/residual.hpp"
#include "rlf/inference.hpp"
#include "rlf/train.hpp"
#include "rlf/random_forest.hpp"
#include "rlf/data_io.hpp"
#include "rlf/harness.hpp"
