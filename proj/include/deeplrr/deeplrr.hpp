#pragma once

#include "deeplrr/error.hpp"
#include "deeplrr/heatmap.hpp"
#include "deeplrr/layer_solver.hpp"
#include "deeplrr/matrix_io.hpp"
#include "deeplrr/metrics.hpp"
#include "deeplrr/network.hpp"
#include "deeplrr/pipeline.hpp"
#include "deeplrr/spectral.hpp"
#include "deeplrr/synth.hpp"
