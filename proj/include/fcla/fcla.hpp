#ifndef FCLA_FCLA_HPP
#define FCLA_FCLA_HPP

#include "fcla/types.hpp"
#include "fcla/conic.hpp"
#include "fcla/scenario.hpp"
#include "fcla/channel.hpp"
#include "fcla/metrics.hpp"
#include "fcla/fp.hpp"
#include "fcla/beamform.hpp"
#include "fcla/placement.hpp"
#include "fcla/bcd.hpp"
#include "fcla/io.hpp"
#include "fcla/harness.hpp"

#endif // FCLA_FCLA_HPP
