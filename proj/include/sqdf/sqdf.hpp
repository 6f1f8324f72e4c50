#pragma once

#include "sqdf/calibration.hpp"
#include "sqdf/counting.hpp"
#include "sqdf/dichotomy.hpp"
#include "sqdf/error.hpp"
#include "sqdf/fft.hpp"
#include "sqdf/fourier.hpp"
#include "sqdf/io/json.hpp"
#include "sqdf/mollifier.hpp"
#include "sqdf/periodic.hpp"
#include "sqdf/sets.hpp"
#include "sqdf/weyl.hpp"
