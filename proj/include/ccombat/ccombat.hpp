#pragma once

// Umbrella header.
#include "ccombat/classifiers.hpp"
#include "ccombat/cluster_combat.hpp"
#include "ccombat/combat.hpp"
#include "ccombat/dataset.hpp"
#include "ccombat/error.hpp"
#include "ccombat/experiments.hpp"
#include "ccombat/federated/messages.hpp"
#include "ccombat/federated/protocol.hpp"
#include "ccombat/federated/transport.hpp"
#include "ccombat/kmeans.hpp"
#include "ccombat/matrix.hpp"
#include "ccombat/metrics.hpp"
#include "ccombat/model_io.hpp"
#include "ccombat/numerics.hpp"
#include "ccombat/rng.hpp"
#include "ccombat/synthgen.hpp"
