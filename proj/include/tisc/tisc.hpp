#pragma once

// umbrella header

#include "tisc/backprop.hpp"
#include "tisc/bench.hpp"
#include "tisc/common.hpp"
#include "tisc/costs.hpp"
#include "tisc/dataset.hpp"
#include "tisc/folds.hpp"
#include "tisc/grad.hpp"
#include "tisc/interleave.hpp"
#include "tisc/io_util.hpp"
#include "tisc/layers.hpp"
#include "tisc/model_io.hpp"
#include "tisc/network.hpp"
#include "tisc/optimizer.hpp"
#include "tisc/rng.hpp"
#include "tisc/saliency.hpp"
#include "tisc/scales.hpp"
#include "tisc/source.hpp"
#include "tisc/synth.hpp"
#include "tisc/threading.hpp"
#include "tisc/trainer.hpp"
#include "tisc/tree.hpp"
