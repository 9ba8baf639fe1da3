#pragma once

#include "cmqe/corpus.hpp"
#include "cmqe/embedding.hpp"
#include "cmqe/embedding_cache.hpp"
#include "cmqe/feature_matrix.hpp"
#include "cmqe/gbdt.hpp"
#include "cmqe/metrics.hpp"
#include "cmqe/model_io.hpp"
#include "cmqe/pipeline.hpp"
#include "cmqe/report.hpp"
