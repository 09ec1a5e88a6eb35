#pragma once

#include "confsieve/chunk_similarity.hpp"
#include "confsieve/entry_tracker.hpp"
#include "confsieve/error.hpp"
#include "confsieve/eval_harness.hpp"
#include "confsieve/filters.hpp"
#include "confsieve/pipeline.hpp"
#include "confsieve/rabin.hpp"
#include "confsieve/trace_ingest.hpp"
#include "confsieve/trigger_sampler.hpp"
#include "confsieve/types.hpp"
#include "confsieve/version_store.hpp"
