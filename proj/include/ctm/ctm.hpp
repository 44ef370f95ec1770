#pragma once

// Umbrella header.

#include "ctm/classifier.hpp"
#include "ctm/constraints.hpp"
#include "ctm/corpus.hpp"
#include "ctm/error.hpp"
#include "ctm/eval.hpp"
#include "ctm/features.hpp"
#include "ctm/pipeline.hpp"
#include "ctm/random.hpp"
#include "ctm/synthetic.hpp"
#include "ctm/text.hpp"
#include "ctm/topic_space.hpp"
#include "ctm/weak_labeler.hpp"
