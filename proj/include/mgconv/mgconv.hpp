#pragma once

#include "mgconv/config.hpp"
#include "mgconv/convnet.hpp"
#include "mgconv/fe.hpp"
#include "mgconv/fields.hpp"
#include "mgconv/grid.hpp"
#include "mgconv/metrics.hpp"
#include "mgconv/mldata.hpp"
#include "mgconv/multigrid.hpp"
#include "mgconv/parallel.hpp"
#include "mgconv/verify.hpp"
