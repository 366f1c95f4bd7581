#pragma once

// Umbrella header.

#include "motifcar/config.hpp"
#include "motifcar/dataset_io.hpp"
#include "motifcar/detector.hpp"
#include "motifcar/error.hpp"
#include "motifcar/gnn.hpp"
#include "motifcar/gradcheck.hpp"
#include "motifcar/graph.hpp"
#include "motifcar/graphon.hpp"
#include "motifcar/losses.hpp"
#include "motifcar/metrics.hpp"
#include "motifcar/optimizer.hpp"
#include "motifcar/producer.hpp"
#include "motifcar/random.hpp"
#include "motifcar/synthetic.hpp"
