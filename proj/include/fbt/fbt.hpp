#pragma once

// Umbrella header for the FBT response prediction library.

#include "fbt/artifact.hpp"
#include "fbt/cohort.hpp"
#include "fbt/common.hpp"
#include "fbt/experiment.hpp"
#include "fbt/featurize.hpp"
#include "fbt/ingest.hpp"
#include "fbt/linear.hpp"
#include "fbt/metrics.hpp"
#include "fbt/nn/model.hpp"
#include "fbt/schema.hpp"
#include "fbt/synth.hpp"
#include "fbt/tensor.hpp"
#include "fbt/train.hpp"
#include "fbt/types.hpp"
