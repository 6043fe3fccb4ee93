#pragma once

#include "nratio/error.hpp"
#include "nratio/linalg.hpp"
#include "nratio/special.hpp"
#include "nratio/quadrature.hpp"
#include "nratio/model.hpp"
#include "nratio/density.hpp"
#include "nratio/oracle.hpp"
#include "nratio/random.hpp"
#include "nratio/sampler.hpp"
#include "nratio/mvn_cdf.hpp"
#include "nratio/ratio_cdf.hpp"
