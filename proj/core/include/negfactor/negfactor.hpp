#pragma once

#include "negfactor/dataset.hpp"
#include "negfactor/error.hpp"
#include "negfactor/evaluation.hpp"
#include "negfactor/factorization.hpp"
#include "negfactor/model.hpp"
#include "negfactor/normalization.hpp"
#include "negfactor/optim.hpp"
#include "negfactor/report.hpp"
#include "negfactor/response.hpp"
#include "negfactor/stats.hpp"
#include "negfactor/synthetic.hpp"
