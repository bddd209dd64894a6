#pragma once

// Umbrella header.

#include "stereorisk/costvol.hpp"
#include "stereorisk/distribution.hpp"
#include "stereorisk/errors.hpp"
#include "stereorisk/grad.hpp"
#include "stereorisk/image.hpp"
#include "stereorisk/io.hpp"
#include "stereorisk/metrics.hpp"
#include "stereorisk/oracle.hpp"
#include "stereorisk/parallel.hpp"
#include "stereorisk/pipeline.hpp"
#include "stereorisk/risk.hpp"
#include "stereorisk/synthetic.hpp"
