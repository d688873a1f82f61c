#pragma once

#include "met/error.hpp"
#include "met/random.hpp"
#include "met/linalg.hpp"
#include "met/dynsys.hpp"
#include "met/cocycle.hpp"
#include "met/oseledets.hpp"
#include "met/symspace.hpp"
#include "met/spaces.hpp"
#include "met/horofunctions.hpp"
#include "met/cat0.hpp"
