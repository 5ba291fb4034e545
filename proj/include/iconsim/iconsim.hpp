#pragma once
// Umbrella header.

#include "iconsim/backbone.hpp"
#include "iconsim/bundle.hpp"
#include "iconsim/config.hpp"
#include "iconsim/corpus.hpp"
#include "iconsim/embeddings.hpp"
#include "iconsim/error.hpp"
#include "iconsim/evaluation.hpp"
#include "iconsim/metrics.hpp"
#include "iconsim/philox.hpp"
#include "iconsim/pipeline.hpp"
#include "iconsim/retrieval.hpp"
#include "iconsim/sift.hpp"
#include "iconsim/store.hpp"
