#pragma once

#include "laf/experiment.hpp"
#include "laf/isi.hpp"
#include "laf/lattice.hpp"
#include "laf/nested.hpp"
#include "laf/network_io.hpp"
#include "laf/relay_network.hpp"
#include "laf/rng.hpp"
#include "laf/stats.hpp"
