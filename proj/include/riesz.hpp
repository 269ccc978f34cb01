#pragma once

#include "riesz/errors.hpp"
#include "riesz/box.hpp"
#include "riesz/random.hpp"
#include "riesz/parallel.hpp"
#include "riesz/quadrature.hpp"
#include "riesz/kernels.hpp"
#include "riesz/model.hpp"
#include "riesz/minimize.hpp"
#include "riesz/background.hpp"
#include "riesz/field.hpp"
#include "riesz/geometry.hpp"
#include "riesz/diagnostics.hpp"
#include "riesz/io.hpp"
