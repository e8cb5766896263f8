#pragma once

#include "linboost/boosting.hpp"
#include "linboost/dataset.hpp"
#include "linboost/error.hpp"
#include "linboost/eval.hpp"
#include "linboost/experiment.hpp"
#include "linboost/leafsolve.hpp"
#include "linboost/model_io.hpp"
#include "linboost/parallel.hpp"
#include "linboost/random.hpp"
#include "linboost/synth.hpp"
#include "linboost/tree.hpp"
