#ifndef HOPSIM_HOPSIM_HPP
#define HOPSIM_HOPSIM_HPP

#include <hopsim/config.hpp>
#include <hopsim/csv.hpp>
#include <hopsim/dynamics.hpp>
#include <hopsim/ensemble.hpp>
#include <hopsim/errors.hpp>
#include <hopsim/experiment.hpp>
#include <hopsim/lzmodel.hpp>
#include <hopsim/potentials.hpp>
#include <hopsim/random.hpp>
#include <hopsim/reference.hpp>
#include <hopsim/types.hpp>

#endif
