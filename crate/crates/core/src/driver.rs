//! The optimization loop: forward solves, adjoints, sensitivity and the
//! Allen-Cahn update, repeated for a fixed number of iterations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::adjoint::{solve_adjoint_cd, solve_adjoint_ns, solve_adjoint_pb, AdjointFields, AdjointOptions, ObjectiveWeights};
use crate::error::Result;
use crate::fem::ScalarField;
use crate::io::{export_vtk, FieldRef, RunHistory, RunRecord};
use crate::linsolve::NewtonSettings;
use crate::mesh::Mesh;
use crate::phasefield::{AllenCahn, OptimParams};
use crate::sensitivity::{
    assemble_sensitivity, eval_free_energy, eval_objectives, Objectives, Projection, SensitivityField,
    SensitivityVariant,
};
use crate::state::{solve_cd, solve_ns, solve_pb, BoundaryData, PhysicsParams, StateFields};

/// A fully specified optimization problem on a fixed mesh.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub bdata: BoundaryData,
    pub params: PhysicsParams,
    pub weights: ObjectiveWeights,
    pub optim: OptimParams,
    pub newton: NewtonSettings,
    pub supg: bool,
    pub adjoint: AdjointOptions,
    pub variant: SensitivityVariant,
    pub projection: Projection,
    /// Nodes where the phase field is held at 1.
    pub fixed_fluid: Vec<usize>,
    pub strict_clamp: bool,
}

/// Newton iteration counts of one forward solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForwardStats {
    pub newton_ns: usize,
    pub newton_pb: usize,
}

/// Stages of one outer iteration, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    PoissonBoltzmann,
    NavierStokes,
    ConvectionDiffusion,
    AdjointConcentration,
    AdjointFlow,
    AdjointPotential,
    Sensitivity,
    AllenCahn,
}

impl Problem {
    /// Forward solves for `phi`, warm-started from `warm` when given.
    pub fn solve_state(&self, phi: &ScalarField, warm: Option<&StateFields>) -> Result<(StateFields, ForwardStats)> {
        self.solve_state_traced(phi, warm, &mut Vec::new())
    }

    fn solve_state_traced(
        &self,
        phi: &ScalarField,
        warm: Option<&StateFields>,
        trace: &mut Vec<Stage>,
    ) -> Result<(StateFields, ForwardStats)> {
        let mesh = &self.mesh;
        let mut stats = ForwardStats::default();
        let psi = if self.params.electrokinetics {
            trace.push(Stage::PoissonBoltzmann);
            let init = warm.map_or_else(|| ScalarField::zeros(mesh), |w| w.psi.clone());
            let (psi, rep) = solve_pb(mesh, phi, &self.bdata, &self.params, &self.newton, &init)?;
            stats.newton_pb = rep.iterations;
            psi
        } else {
            ScalarField::zeros(mesh)
        };
        trace.push(Stage::NavierStokes);
        let psi_arg = self.params.electrokinetics.then_some(&psi);
        let (u, p, rep) = solve_ns(mesh, phi, psi_arg, &self.bdata, &self.params, &self.newton, warm)?;
        stats.newton_ns = rep.iterations;
        trace.push(Stage::ConvectionDiffusion);
        let c = if self.weights.beta2 != 0.0 {
            solve_cd(mesh, &u, &self.bdata, &self.params, self.supg)?
        } else {
            ScalarField::zeros(mesh)
        };
        Ok((StateFields { u, p, psi, c }, stats))
    }

    pub fn solve_adjoint(&self, phi: &ScalarField, state: &StateFields) -> Result<AdjointFields> {
        self.solve_adjoint_traced(phi, state, &mut Vec::new())
    }

    fn solve_adjoint_traced(&self, phi: &ScalarField, state: &StateFields, trace: &mut Vec<Stage>) -> Result<AdjointFields> {
        let mesh = &self.mesh;
        trace.push(Stage::AdjointConcentration);
        let s = solve_adjoint_cd(mesh, &state.u, &state.c, self.bdata.cd, self.weights.beta2, &self.params, self.supg)?;
        trace.push(Stage::AdjointFlow);
        let (v, q) =
            solve_adjoint_ns(mesh, &state.u, &state.c, &s, phi, &self.weights, &self.params, self.adjoint.convection)?;
        let xi = if self.params.electrokinetics {
            trace.push(Stage::AdjointPotential);
            solve_adjoint_pb(mesh, &state.psi, &v, phi, &self.params, &self.bdata)?
        } else {
            ScalarField::zeros(mesh)
        };
        Ok(AdjointFields { v, q, xi, s })
    }

    pub fn sensitivity(&self, state: &StateFields, adj: &AdjointFields) -> Result<SensitivityField> {
        assemble_sensitivity(&self.mesh, state, adj, &self.weights, &self.params, self.variant, self.projection)
    }

    pub fn objectives(&self, phi: &ScalarField, state: &StateFields) -> Objectives {
        eval_objectives(&self.mesh, phi, state, &self.bdata, &self.params)
    }

    /// Weighted objective `beta1 J1 + beta2 J2` after a cold forward solve.
    pub fn reduced_objective(&self, phi: &ScalarField) -> Result<f64> {
        let (state, _) = self.solve_state(phi, None)?;
        Ok(self.objectives(phi, &state).weighted(&self.weights))
    }
}

/// Output settings of a run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for VTK snapshots; nothing is written when absent.
    pub output: Option<PathBuf>,
    pub snapshot_stride: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub phi: ScalarField,
    pub state: Option<StateFields>,
    pub history: RunHistory,
    /// Stages executed, per outer iteration.
    pub trace: Vec<Vec<Stage>>,
}

fn write_fields(mesh: &Mesh, path: &Path, phi: &ScalarField, state: Option<&StateFields>) -> Result<()> {
    let mut fields = vec![FieldRef::Scalar("phi", &phi.values)];
    if let Some(s) = state {
        fields.push(FieldRef::Vector("u", &s.u.nodal));
        fields.push(FieldRef::Scalar("p", &s.p.values));
        fields.push(FieldRef::Scalar("c", &s.c.values));
        fields.push(FieldRef::Scalar("psi", &s.psi.values));
    }
    export_vtk(mesh, &fields, path)
}

fn snapshot(mesh: &Mesh, dir: &Path, iter: usize, phi: &ScalarField, state: Option<&StateFields>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_fields(mesh, &dir.join(format!("snapshot_{iter:04}.vtk")), phi, state)
}

/// Runs `problem.optim.iterations` outer iterations from `phi0`.
pub fn run_optimization(problem: &Problem, phi0: &ScalarField, opts: &RunOptions) -> Result<RunResult> {
    let mesh = &problem.mesh;
    let mut ac = AllenCahn::new(mesh, problem.fixed_fluid.clone())?;
    if problem.strict_clamp {
        ac.strict_limit = Some(1e-3);
    }
    let mut phi = phi0.clone();
    for &i in &problem.fixed_fluid {
        phi.values[i] = 1.0;
    }
    if let Some(dir) = &opts.output {
        snapshot(mesh, dir, 0, &phi, None)?;
    }
    let mut history = RunHistory::default();
    let mut trace = Vec::new();
    let mut state: Option<StateFields> = None;
    for n in 1..=problem.optim.iterations {
        let started = Instant::now();
        let mut stages = Vec::new();
        let result = iterate(problem, &ac, &phi, state.as_ref(), &mut stages);
        let (next_phi, new_state, obj, sens, stats, clamp) = match result {
            Ok(v) => v,
            Err(e) => {
                log::error!("iteration {n} failed: {e}");
                if let Some(dir) = &opts.output {
                    if let Err(e2) = snapshot(mesh, dir, n, &phi, state.as_ref()) {
                        log::error!("post-mortem snapshot failed: {e2}");
                    }
                }
                return Err(e);
            }
        };
        let o = &problem.optim;
        let w = eval_free_energy(mesh, &phi, &sens, &problem.weights, o.kappa, o.eta, o.v0);
        let record = RunRecord {
            iter: n,
            j1: obj.j1,
            j2: obj.j2,
            volume: obj.volume,
            volume_error: (obj.volume - o.v0).abs(),
            free_energy: w,
            newton_ns: stats.newton_ns,
            newton_pb: stats.newton_pb,
            clamp,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "iter {n:4}  J1 {:.6e}  J2 {:.6e}  V {:.6}  W {:.6e}  newton {}/{}  clamp {:.1e}",
            record.j1,
            record.j2,
            record.volume,
            record.free_energy,
            record.newton_ns,
            record.newton_pb,
            record.clamp
        );
        history.records.push(record);
        trace.push(stages);
        phi = next_phi;
        state = Some(new_state);
        if let Some(dir) = &opts.output {
            let stride = opts.snapshot_stride.max(1);
            if n % stride == 0 || n == problem.optim.iterations {
                snapshot(mesh, dir, n, &phi, state.as_ref())?;
            }
        }
    }
    if let Some(dir) = &opts.output {
        std::fs::create_dir_all(dir)?;
        write_fields(mesh, &dir.join("final.vtk"), &phi, state.as_ref())?;
    }
    Ok(RunResult { phi, state, history, trace })
}

type IterationOutput = (ScalarField, StateFields, Objectives, SensitivityField, ForwardStats, f64);

fn iterate(
    problem: &Problem,
    ac: &AllenCahn,
    phi: &ScalarField,
    warm: Option<&StateFields>,
    stages: &mut Vec<Stage>,
) -> Result<IterationOutput> {
    let (state, stats) = problem.solve_state_traced(phi, warm, stages)?;
    let obj = problem.objectives(phi, &state);
    let adj = problem.solve_adjoint_traced(phi, &state, stages)?;
    stages.push(Stage::Sensitivity);
    let sens = problem.sensitivity(&state, &adj)?;
    stages.push(Stage::AllenCahn);
    let step = ac.run_substeps(&problem.mesh, phi, &sens, &problem.optim)?;
    Ok((step.phi, state, obj, sens, stats, step.clamp))
}
