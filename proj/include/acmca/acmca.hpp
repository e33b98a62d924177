#pragma once

#include "acmca/checkpoint.hpp"
#include "acmca/data.hpp"
#include "acmca/dataset_store.hpp"
#include "acmca/error.hpp"
#include "acmca/eval.hpp"
#include "acmca/fft.hpp"
#include "acmca/io.hpp"
#include "acmca/model.hpp"
#include "acmca/presets.hpp"
#include "acmca/stats.hpp"
#include "acmca/svg.hpp"
#include "acmca/tensor.hpp"
#include "acmca/train.hpp"
