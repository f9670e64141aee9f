#pragma once

#include "alm.hpp"
#include "instances.hpp"
#include "oracle.hpp"
#include "report.hpp"
