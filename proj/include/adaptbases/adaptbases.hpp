#pragma once

#include "adaptbases/basis.hpp"
#include "adaptbases/cluster.hpp"
#include "adaptbases/common.hpp"
#include "adaptbases/config.hpp"
#include "adaptbases/covariance.hpp"
#include "adaptbases/dataset.hpp"
#include "adaptbases/delaunay.hpp"
#include "adaptbases/draws_io.hpp"
#include "adaptbases/glm.hpp"
#include "adaptbases/manifest.hpp"
#include "adaptbases/metrics.hpp"
#include "adaptbases/predict.hpp"
#include "adaptbases/sampler.hpp"
#include "adaptbases/simulate.hpp"
#include "adaptbases/state.hpp"
