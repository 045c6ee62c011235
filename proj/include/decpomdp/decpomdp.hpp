#ifndef DECPOMDP_DECPOMDP_HPP
#define DECPOMDP_DECPOMDP_HPP

#include "model.hpp"
#include "parser.hpp"
#include "clustering.hpp"
#include "policy.hpp"
#include "engine.hpp"
#include "heuristics.hpp"
#include "search.hpp"

#endif
