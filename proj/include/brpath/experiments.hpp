#pragma once

#include <string>

#include "brpath/config.hpp"
#include "brpath/montecarlo.hpp"

namespace brpath {

/// One finished experiment: the CSV report and its worst verdict.
struct RunResult {
  std::string csv;
  std::size_t rows = 0;
  mc::Verdict verdict = mc::Verdict::Pass;
};

/// 0 pass, 2 any fail, 3 inconclusive only.
int exit_code(mc::Verdict v);

/// Runs cfg.experiment. The CSV depends only on the config (never on the
/// worker count). Schemas:
///   verdict experiments: inequality,model,testfn,kappa,lhs,lhs_se,rhs,rhs_se,margin,z,verdict,n_paths,seed
///   cone-holonomy:       l,radius,sides,turns,holonomy,expected,error,verdict
///   cone-parallelogram:  j,e1,e2,e3,e4,Px,Pv,eps_min
///   cone-br-probe:       l,offset,scale,through_apex,eps_min,relative_eps,norm_ratio
///   martingale-moments:  testfn,k,gap,moment,moment_se,bound,slope,implied_c,bound_c,within_bound
RunResult run_experiment(const ExperimentConfig& cfg);

/// Debug dump of martingale traces for the first test function:
/// path_id,t,F_t,cumulative_qv on the t grid (or `steps` uniform knots).
std::string sample_traces(const ExperimentConfig& cfg);

}  // namespace brpath
