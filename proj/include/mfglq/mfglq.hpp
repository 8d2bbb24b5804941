#pragma once

// Umbrella header: decentralized epsilon-Stackelberg-Nash equilibrium solver
// for the linear-quadratic major / minor-leader / follower mean-field game.

#include "convexity.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "io.hpp"
#include "meanfield.hpp"
#include "model.hpp"
#include "nash.hpp"
#include "riccati.hpp"
#include "rng.hpp"
#include "scenarios.hpp"
#include "simulate.hpp"
