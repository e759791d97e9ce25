#pragma once

#include "ncdipole/core.hpp"
#include "ncdipole/vibronic.hpp"
#include "ncdipole/dipole.hpp"
#include "ncdipole/polarimetry.hpp"
#include "ncdipole/photostats.hpp"
#include "ncdipole/csv.hpp"
#include "ncdipole/config.hpp"
#include "ncdipole/pipeline.hpp"
