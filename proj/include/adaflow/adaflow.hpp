#pragma once

#include "adaflow/adaptation.hpp"
#include "adaflow/autoencoder.hpp"
#include "adaflow/bench.hpp"
#include "adaflow/common.hpp"
#include "adaflow/flow.hpp"
#include "adaflow/io.hpp"
#include "adaflow/layers.hpp"
#include "adaflow/scoring.hpp"
#include "adaflow/synth.hpp"
#include "adaflow/training.hpp"
#include "adaflow/translation.hpp"
