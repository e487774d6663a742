#ifndef PHSMM_PHSMM_HPP
#define PHSMM_PHSMM_HPP

#include "phsmm/dataset.hpp"
#include "phsmm/dwell.hpp"
#include "phsmm/emission.hpp"
#include "phsmm/expand.hpp"
#include "phsmm/fit.hpp"
#include "phsmm/inference.hpp"
#include "phsmm/io.hpp"
#include "phsmm/model.hpp"
#include "phsmm/penalty.hpp"
#include "phsmm/select.hpp"
#include "phsmm/simulate.hpp"

#endif
