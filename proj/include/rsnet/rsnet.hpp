#pragma once

#include "rsnet/cloud.hpp"
#include "rsnet/common.hpp"
#include "rsnet/config.hpp"
#include "rsnet/gradcheck.hpp"
#include "rsnet/metrics.hpp"
#include "rsnet/model.hpp"
#include "rsnet/nn.hpp"
#include "rsnet/pipeline.hpp"
#include "rsnet/rnn.hpp"
#include "rsnet/slicing.hpp"
#include "rsnet/synth.hpp"
#include "rsnet/train.hpp"
