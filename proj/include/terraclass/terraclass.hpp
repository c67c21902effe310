#pragma once

// Umbrella header for the terraclass library.

#include "terraclass/attributes.hpp"
#include "terraclass/errors.hpp"
#include "terraclass/fuzzy.hpp"
#include "terraclass/gaussian.hpp"
#include "terraclass/parallel.hpp"
#include "terraclass/raster.hpp"
#include "terraclass/report.hpp"
#include "terraclass/roi.hpp"
#include "terraclass/rules.hpp"
#include "terraclass/segmentation.hpp"
#include "terraclass/synthetic.hpp"
#include "terraclass/textio.hpp"
