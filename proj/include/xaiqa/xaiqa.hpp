#pragma once

#include "xaiqa/error.hpp"
#include "xaiqa/text.hpp"
#include "xaiqa/rng.hpp"
#include "xaiqa/jsonl.hpp"
#include "xaiqa/parallel.hpp"
#include "xaiqa/corpus.hpp"
#include "xaiqa/classifier.hpp"
#include "xaiqa/explainer.hpp"
#include "xaiqa/embedder.hpp"
#include "xaiqa/remote.hpp"
#include "xaiqa/generator.hpp"
#include "xaiqa/porter.hpp"
#include "xaiqa/hardness.hpp"
#include "xaiqa/stats.hpp"
#include "xaiqa/metrics.hpp"
#include "xaiqa/promptkit.hpp"
#include "xaiqa/config.hpp"
