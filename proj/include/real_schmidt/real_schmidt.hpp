#pragma once

#include "real_schmidt/core_states.hpp"
#include "real_schmidt/errors.hpp"
#include "real_schmidt/flowfield.hpp"
#include "real_schmidt/oracle.hpp"
#include "real_schmidt/reduce5.hpp"
#include "real_schmidt/schmidt4.hpp"
