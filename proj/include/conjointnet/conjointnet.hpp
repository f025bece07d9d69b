#pragma once

#include "conjointnet/autoencoder.hpp"
#include "conjointnet/conjoint/linear.hpp"
#include "conjointnet/conjoint/partworths.hpp"
#include "conjointnet/conjoint/schema.hpp"
#include "conjointnet/dataio/car_preference.hpp"
#include "conjointnet/dataio/csv.hpp"
#include "conjointnet/dataio/dataset.hpp"
#include "conjointnet/dataio/hash.hpp"
#include "conjointnet/dataio/moral_machine.hpp"
#include "conjointnet/dataio/split.hpp"
#include "conjointnet/dataio/synth.hpp"
#include "conjointnet/errors.hpp"
#include "conjointnet/harness/experiment.hpp"
#include "conjointnet/harness/metrics.hpp"
#include "conjointnet/harness/report.hpp"
#include "conjointnet/numcore/gradcheck.hpp"
#include "conjointnet/numcore/layers.hpp"
#include "conjointnet/numcore/losses.hpp"
#include "conjointnet/numcore/matrix.hpp"
#include "conjointnet/numcore/network.hpp"
#include "conjointnet/numcore/optimizer.hpp"
#include "conjointnet/numcore/serialize.hpp"
#include "conjointnet/residual_net.hpp"
#include "conjointnet/ssl_net.hpp"
#include "conjointnet/training.hpp"
