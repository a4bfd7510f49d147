#pragma once

#include "gridquad/brat.hpp"
#include "gridquad/checkpoint.hpp"
#include "gridquad/corpus.hpp"
#include "gridquad/error.hpp"
#include "gridquad/eval.hpp"
#include "gridquad/gradcheck.hpp"
#include "gridquad/grid.hpp"
#include "gridquad/model.hpp"
#include "gridquad/params.hpp"
#include "gridquad/synth.hpp"
#include "gridquad/train.hpp"
