#ifndef ONEA_ONEA_HPP
#define ONEA_ONEA_HPP

#include "onea/adapter.hpp"
#include "onea/container.hpp"
#include "onea/counters.hpp"
#include "onea/errors.hpp"
#include "onea/matrix.hpp"
#include "onea/merge.hpp"
#include "onea/metrics.hpp"
#include "onea/random.hpp"
#include "onea/report.hpp"
#include "onea/sim.hpp"
#include "onea/stream.hpp"
#include "onea/svd.hpp"

#endif // ONEA_ONEA_HPP
