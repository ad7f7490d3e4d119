#pragma once

#include "evalue/benchlab.hpp"
#include "evalue/dataset.hpp"
#include "evalue/dataset_io.hpp"
#include "evalue/error.hpp"
#include "evalue/evcore.hpp"
#include "evalue/parallel.hpp"
#include "evalue/pca_gap.hpp"
#include "evalue/report.hpp"
#include "evalue/softmax.hpp"
#include "evalue/specmath.hpp"
#include "evalue/synth.hpp"
#include "evalue/valuers.hpp"
#include "evalue/value_vector.hpp"
