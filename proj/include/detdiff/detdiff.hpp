#pragma once

#include "detdiff/billiard.hpp"
#include "detdiff/density.hpp"
#include "detdiff/dominant_eigen.hpp"
#include "detdiff/error.hpp"
#include "detdiff/lift_map.hpp"
#include "detdiff/markov_partition.hpp"
#include "detdiff/monte_carlo.hpp"
#include "detdiff/parallel.hpp"
#include "detdiff/polynomial.hpp"
#include "detdiff/random.hpp"
#include "detdiff/surd.hpp"
#include "detdiff/transfer_operator.hpp"
