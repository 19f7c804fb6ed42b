#pragma once

#include "l4twist/errors.hpp"
#include "l4twist/dynamics.hpp"
#include "l4twist/integrate.hpp"
#include "l4twist/section.hpp"
#include "l4twist/rotation.hpp"
#include "l4twist/polynomial.hpp"
#include "l4twist/normalform.hpp"
#include "l4twist/twist.hpp"
#include "l4twist/io.hpp"
#include "l4twist/scan.hpp"
