#pragma once

#include "firelite/errors.hpp"
#include "firelite/evaluate.hpp"
#include "firelite/metrics.hpp"
#include "firelite/model.hpp"
#include "firelite/nn_ops.hpp"
#include "firelite/tensor.hpp"
#include "firelite/vision.hpp"
#include "firelite/weights_io.hpp"
