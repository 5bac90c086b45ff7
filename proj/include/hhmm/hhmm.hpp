#pragma once

#include "hhmm/emissions.hpp"
#include "hhmm/error.hpp"
#include "hhmm/generation.hpp"
#include "hhmm/inference.hpp"
#include "hhmm/kernels.hpp"
#include "hhmm/matrix.hpp"
#include "hhmm/model.hpp"
#include "hhmm/numerics.hpp"
#include "hhmm/selection.hpp"
#include "hhmm/training.hpp"
