#pragma once

// Umbrella header: the whole bail-prediction pipeline.

#include "bailcnn/checkpoint.hpp"
#include "bailcnn/corpus.hpp"
#include "bailcnn/errors.hpp"
#include "bailcnn/experiment.hpp"
#include "bailcnn/io.hpp"
#include "bailcnn/layers.hpp"
#include "bailcnn/metrics.hpp"
#include "bailcnn/model.hpp"
#include "bailcnn/rng.hpp"
#include "bailcnn/sanitizer.hpp"
#include "bailcnn/tensor.hpp"
#include "bailcnn/tokenizer.hpp"
#include "bailcnn/unicode.hpp"
