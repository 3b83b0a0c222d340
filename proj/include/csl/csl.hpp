#ifndef CSL_CSL_HPP
#define CSL_CSL_HPP

#include "csl/types.hpp"
#include "csl/topology.hpp"
#include "csl/data.hpp"
#include "csl/losses.hpp"
#include "csl/engine.hpp"
#include "csl/metrics.hpp"
#include "csl/harness.hpp"
#include "csl/plot.hpp"
#include "csl/figures.hpp"
#include "csl/verify.hpp"

#endif  // CSL_CSL_HPP
