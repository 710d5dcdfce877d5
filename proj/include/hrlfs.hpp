#pragma once

// Umbrella header. The HTTP transport (cpp-httplib) is not included here;
// include "hrlfs/http_transport.hpp" when talking to a remote endpoint.

#include "hrlfs/agent.hpp"
#include "hrlfs/dataset.hpp"
#include "hrlfs/embedding.hpp"
#include "hrlfs/engine.hpp"
#include "hrlfs/error.hpp"
#include "hrlfs/feature_state.hpp"
#include "hrlfs/forest.hpp"
#include "hrlfs/gmm.hpp"
#include "hrlfs/hierarchy.hpp"
#include "hrlfs/mask.hpp"
#include "hrlfs/metrics.hpp"
#include "hrlfs/nn.hpp"
#include "hrlfs/pca.hpp"
#include "hrlfs/random.hpp"
#include "hrlfs/replay.hpp"
#include "hrlfs/svg.hpp"
