#pragma once

#include "cmekit/embedding.hpp"
#include "cmekit/error.hpp"
#include "cmekit/estimator.hpp"
#include "cmekit/kernel.hpp"
#include "cmekit/models.hpp"
#include "cmekit/random.hpp"
#include "cmekit/spectral.hpp"
