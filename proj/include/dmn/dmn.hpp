// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dmn/approx.hpp"
#include "dmn/data.hpp"
#include "dmn/error.hpp"
#include "dmn/eval.hpp"
#include "dmn/intervals.hpp"
#include "dmn/likelihood.hpp"
#include "dmn/mixture.hpp"
#include "dmn/network.hpp"
#include "dmn/special.hpp"
