#pragma once

#include "afcn/attention.hpp"
#include "afcn/commands.hpp"
#include "afcn/data.hpp"
#include "afcn/dsp.hpp"
#include "afcn/error.hpp"
#include "afcn/eval.hpp"
#include "afcn/gradcheck.hpp"
#include "afcn/heatmap.hpp"
#include "afcn/io.hpp"
#include "afcn/layers.hpp"
#include "afcn/model.hpp"
#include "afcn/random.hpp"
#include "afcn/runconfig.hpp"
#include "afcn/tensor.hpp"
#include "afcn/threadpool.hpp"
#include "afcn/train.hpp"
