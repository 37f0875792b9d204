#pragma once

// Umbrella header.
#include "gliorank/case_data.hpp"
#include "gliorank/config.hpp"
#include "gliorank/core_fields.hpp"
#include "gliorank/eikonal.hpp"
#include "gliorank/error.hpp"
#include "gliorank/eval_schemes.hpp"
#include "gliorank/fitting.hpp"
#include "gliorank/growth_model.hpp"
#include "gliorank/grv_io.hpp"
#include "gliorank/log.hpp"
#include "gliorank/phantom.hpp"
#include "gliorank/powell.hpp"
#include "gliorank/ranking_eval.hpp"
#include "gliorank/run_config.hpp"
#include "gliorank/statistics.hpp"
