use mechagents::dsl::*;
use mechagents::fem::{BoundaryCondition, EdgeLabel, GeometrySpec, Kinematics, MaterialModel, StressComponent};
use proptest::prelude::*;

const ROUND1: &str = r#"{
  "geometry": {"kind": "rectangle", "width": 1.0, "height": 1.0},
  "mesh": {"nx": 16, "ny": 16},
  "material": {"model": "linear_elastic", "E": 1e9, "nu": 0.3},
  "kinematics": "small_strain",
  "bcs": [
    {"edge": "left", "ux": 0.0, "uy": 0.0},
    {"edge": "right", "ux": 0.1, "uy": 0.0}
  ],
  "outputs": [{"kind": "displacement_png"}]
}"#;

fn copper_hole(n: usize) -> ProblemSpec {
    ProblemSpec {
        geometry: GeometrySpec::with_hole(1.0, 1.0, [0.5, 0.5], 0.2),
        mesh: MeshSize { nx: n, ny: n },
        material: Some(MaterialRef::named("copper")),
        kinematics: KinematicsSpec::Mode(Kinematics::SmallStrain),
        bcs: vec![
            BoundaryCondition::fixed(EdgeLabel::Left),
            BoundaryCondition::new(EdgeLabel::Right, Some(0.02), Some(0.0)),
        ],
        outputs: vec![OutputRequest::new(OutputKind::DisplacementPng), OutputRequest::traction(EdgeLabel::Right)],
    }
}

fn codes(spec: &ProblemSpec) -> Vec<ViolationCode> {
    validate(spec).codes()
}

#[test]
fn round1_document_parses() {
    let spec = parse_problem(ROUND1).unwrap();
    assert_eq!(spec.mesh, MeshSize { nx: 16, ny: 16 });
    assert_eq!(spec.material, Some(MaterialRef::youngs(1e9, 0.3, MaterialModel::LinearElastic)));
    assert_eq!(spec.bcs.len(), 2);
    assert!(validate(&spec).is_valid());
}

#[test]
fn missing_material_is_reported_with_lame_names() {
    let doc = ROUND1.replace(r#""material": {"model": "linear_elastic", "E": 1e9, "nu": 0.3},"#, "");
    let spec = parse_problem(&doc).unwrap();
    let report = validate(&spec);
    assert_eq!(report.codes(), vec![ViolationCode::MissingMaterial]);
    assert_eq!(report.violations[0].message, "material properties not defined: mu, lambda");
}

#[test]
fn parse_errors_are_classified() {
    let empty = parse_problem("").unwrap_err();
    assert_eq!((empty.kind, empty.line), (ParseErrorKind::SyntaxError, 1));

    let unknown = parse_problem(&ROUND1.replace("\"mesh\"", "\"grid\"")).unwrap_err();
    assert_eq!(unknown.kind, ParseErrorKind::UnknownKey);
    assert!(unknown.message.contains("grid"));

    let mismatch = parse_problem(&ROUND1.replace("\"E\": 1e9", "\"E\": \"1GPa\"")).unwrap_err();
    assert_eq!(mismatch.kind, ParseErrorKind::TypeMismatch);
    assert_eq!(mismatch.line, 4);

    let bad_edge_name = parse_problem(&ROUND1.replace("\"left\"", "\"middle\"")).unwrap_err();
    assert_eq!(bad_edge_name.kind, ParseErrorKind::TypeMismatch);

    let truncated = parse_problem(&ROUND1[..ROUND1.len() - 3]).unwrap_err();
    assert_eq!(truncated.kind, ParseErrorKind::SyntaxError);
}

#[test]
fn kinematics_object_form() {
    let doc = ROUND1.replace(
        "\"kinematics\": \"small_strain\"",
        "\"kinematics\": {\"mode\": \"finite_strain\", \"newton\": {\"max_iters\": 0}}",
    );
    let spec = parse_problem(&doc).unwrap();
    assert_eq!(spec.kinematics.mode(), Kinematics::FiniteStrain);
    let report = validate(&spec);
    assert_eq!(report.codes(), vec![ViolationCode::InvalidParameter]);
    assert_eq!(report.violations[0].subject, "max_iters");
    assert!(parse_problem(&doc.replace("max_iters", "max_iter")).is_err());
}

#[test]
fn validation_codes() {
    let mut spec = copper_hole(32);
    spec.outputs = vec![OutputRequest::new(OutputKind::TractionForce)];
    assert_eq!(codes(&spec), vec![ViolationCode::OutputUnderspecified]);

    spec.outputs = vec![OutputRequest::new(OutputKind::StressComponent)];
    assert_eq!(codes(&spec), vec![ViolationCode::OutputUnderspecified]);

    let mut plain = copper_hole(32);
    plain.geometry = GeometrySpec::unit_square();
    assert!(codes(&plain).is_empty());
    plain.bcs.push(BoundaryCondition::fixed(EdgeLabel::Hole));
    let report = validate(&plain);
    assert_eq!(report.codes(), vec![ViolationCode::BadEdge]);
    assert_eq!(report.violations[0].subject, "hole");

    let mut outside = copper_hole(32);
    outside.geometry = GeometrySpec::with_hole(1.0, 1.0, [0.9, 0.5], 0.2);
    assert_eq!(codes(&outside), vec![ViolationCode::HoleOutOfBounds]);

    let mut free = copper_hole(32);
    free.bcs.clear();
    assert_eq!(codes(&free), vec![ViolationCode::NoConstraint]);

    let mut sliding = copper_hole(32);
    sliding.bcs = vec![BoundaryCondition::new(EdgeLabel::Left, Some(0.0), None)];
    assert_eq!(codes(&sliding), vec![ViolationCode::NoConstraint]);

    let mut rollers = copper_hole(32);
    rollers.bcs = vec![
        BoundaryCondition::new(EdgeLabel::Left, Some(0.0), None),
        BoundaryCondition::new(EdgeLabel::Bottom, None, Some(0.0)),
    ];
    assert!(codes(&rollers).is_empty());

    let mut conflict = copper_hole(32);
    conflict.bcs.push(BoundaryCondition::new(EdgeLabel::Top, Some(0.5), None));
    assert_eq!(codes(&conflict), vec![ViolationCode::InvalidParameter]);

    let mut escaping = copper_hole(32);
    escaping.outputs = vec![OutputRequest::new(OutputKind::VonMises).with_path("../vm.png")];
    assert_eq!(codes(&escaping), vec![ViolationCode::InvalidParameter]);

    let mut coarse = copper_hole(2);
    coarse.mesh = MeshSize { nx: 2, ny: 2 };
    assert_eq!(codes(&coarse), vec![ViolationCode::InvalidParameter]);
}

#[test]
fn round3_hole_spec_is_valid() {
    let mut spec = parse_problem(ROUND1).unwrap();
    spec.geometry = GeometrySpec::with_hole(1.0, 1.0, [0.5, 0.5], 0.2);
    spec.mesh = MeshSize { nx: 50, ny: 50 };
    spec.bcs[1] = BoundaryCondition::new(EdgeLabel::Right, Some(0.0), Some(0.1));
    let report = validate(&spec);
    assert!(report.violations.is_empty(), "{report:?}");
}

#[test]
fn material_lookup() {
    let cu = lookup_material("copper").unwrap();
    assert_eq!((cu.lambda, cu.mu), (7.69e10, 4.83e10));
    assert_eq!(cu.model, MaterialModel::LinearElastic);
    assert_eq!(lookup_material("Copper").unwrap(), cu);
    assert!(matches!(lookup_material("unobtainium"), Err(MaterialDbError::Unknown(n)) if n == "unobtainium"));

    let mut spec = copper_hole(16);
    spec.material = Some(MaterialRef::named("steel"));
    let report = validate(&spec);
    assert_eq!(report.codes(), vec![ViolationCode::MissingMaterial]);
    assert_eq!(report.violations[0].subject, "steel");
    assert!(report.violations[0].message.contains("steel"));
}

#[test]
fn partial_material_names_missing_symbol() {
    let mut spec = copper_hole(16);
    spec.material = Some(MaterialRef { mu: Some(1e9), ..Default::default() });
    let r = validate(&spec);
    assert_eq!(r.violations[0].message, "material properties not defined: lambda");
    spec.material = Some(MaterialRef::youngs(1e9, 0.5, MaterialModel::LinearElastic));
    assert_eq!(validate(&spec).codes(), vec![ViolationCode::InvalidParameter]);
}

#[test]
fn material_db_rejects_bad_files() {
    assert!(MaterialDb::parse("{}").is_err());
    assert!(MaterialDb::parse(r#"{"format":"mechagents-materials","version":2,"materials":{}}"#).is_err());
    let db = MaterialDb::parse(
        r#"{"format":"mechagents-materials","version":1,"materials":{"Rubber":{"lambda":2e9,"mu":1e6,"model":"neo_hookean"}}}"#,
    )
    .unwrap();
    assert_eq!(db.lookup("rubber").unwrap().model, MaterialModel::NeoHookean);
}

#[test]
fn schema_file_lists_top_level_keys() {
    let schema: serde_json::Value = serde_json::from_str(include_str!("../data/problem.schema.json")).unwrap();
    let keys: Vec<&str> = schema["properties"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["geometry", "mesh", "material", "kinematics", "bcs", "outputs"]);
}

#[test]
fn round1_executes_to_one_png() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = execute_problem(&parse_problem(ROUND1).unwrap(), dir.path());
    assert_eq!(outcome.status, OutcomeStatus::Success, "{}", outcome.render());
    assert_eq!(outcome.artifacts.len(), 1);
    assert!(dir.path().join("displacement.png").exists());
    assert!(dir.path().join("displacement.field").exists());
    let text = outcome.render();
    assert!(text.starts_with("status: success\n"));
    assert!(text.contains("artifact: displacement.png"));
}

#[test]
fn copper_hole_executes_with_traction() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = execute_problem(&copper_hole(64), dir.path());
    assert!(outcome.is_success(), "{}", outcome.render());
    let fx = outcome.scalars["traction_force_x"];
    assert!((fx - 2.0526e9).abs() <= 0.15 * 2.0526e9, "{fx:e}");
    assert!(outcome.render().contains(&format!("traction_force_x: {}", sig6(fx))));
}

#[test]
fn failures_become_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = copper_hole(16);
    spec.material = None;
    let out = execute_problem(&spec, dir.path());
    assert_eq!(out.status, OutcomeStatus::ValidationError);
    assert!(out.render().contains("MISSING_MATERIAL: mu, lambda"));
    assert!(!out.message.is_empty());

    let (parsed, exec) = execute_document("", dir.path());
    assert!(parsed.is_none());
    assert_eq!(exec.outcome.status, OutcomeStatus::ValidationError);
    assert_eq!(exec.outcome.codes(), ["SYNTAX_ERROR"]);

    let mut diverging = copper_hole(8);
    diverging.geometry = GeometrySpec::unit_square();
    diverging.material = Some(MaterialRef::youngs(1e9, 0.3, MaterialModel::NeoHookean));
    diverging.bcs[1] = BoundaryCondition::new(EdgeLabel::Right, Some(5.0), Some(0.0));
    diverging.kinematics = KinematicsSpec::Detailed(KinematicsDetail {
        mode: Kinematics::FiniteStrain,
        newton: Some(NewtonSettings { load_stepping: Some(false), ..Default::default() }),
    });
    let out = execute_problem(&diverging, dir.path());
    assert_eq!(out.status, OutcomeStatus::SolverError);
    let text = out.render();
    assert!(text.starts_with("status: solver_error\n"));
    assert!(text.contains("residual history") || text.contains("INVERTED_ELEMENT"), "{text}");
}

#[test]
fn kinematics_mismatch_warns_and_solves() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = parse_problem(ROUND1).unwrap();
    spec.kinematics = KinematicsSpec::Mode(Kinematics::FiniteStrain);
    let out = execute_problem(&spec, dir.path());
    assert!(out.is_success());
    assert_eq!(out.warnings.len(), 1);
}

#[test]
fn stress_outputs_and_determinism() {
    let spec = ProblemSpec {
        outputs: vec![
            OutputRequest::stress(StressComponent::Xy),
            OutputRequest::new(OutputKind::VonMises),
            OutputRequest::traction(EdgeLabel::Right),
        ],
        ..copper_hole(20)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = execute_problem(&spec, a.path());
    let ob = execute_problem(&spec, b.path());
    assert_eq!(oa, ob);
    assert_eq!(oa.artifacts.iter().map(|x| x.path.as_str()).collect::<Vec<_>>(), ["sigma_xy.png", "von_mises.png"]);
    for f in ["sigma_xy.field", "von_mises.field"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let vm = oa.artifact("von_mises.png").unwrap();
    assert!(vm.min >= 0.0);
    let sxy = oa.artifact("sigma_xy.png").unwrap();
    assert!(sxy.min < 0.0 && sxy.max > 0.0);
}

fn edge_strategy() -> impl Strategy<Value = EdgeLabel> {
    prop::sample::select(vec![EdgeLabel::Left, EdgeLabel::Right, EdgeLabel::Top, EdgeLabel::Bottom, EdgeLabel::Hole])
}

fn spec_strategy() -> impl Strategy<Value = ProblemSpec> {
    let material = prop_oneof![
        Just(None),
        Just(Some(MaterialRef::named("copper"))),
        (1e6f64..1e12, 0.01f64..0.49).prop_map(|(e, nu)| Some(MaterialRef::youngs(e, nu, MaterialModel::NeoHookean))),
        (1e6f64..1e12, 1e6f64..1e12).prop_map(|(m, l)| Some(MaterialRef::lame(m, l, MaterialModel::LinearElastic))),
    ];
    let kin = prop_oneof![
        Just(KinematicsSpec::Mode(Kinematics::SmallStrain)),
        (1usize..40, any::<bool>()).prop_map(|(it, ls)| KinematicsSpec::Detailed(KinematicsDetail {
            mode: Kinematics::FiniteStrain,
            newton: Some(NewtonSettings { max_iters: Some(it), load_stepping: Some(ls), ..Default::default() }),
        })),
    ];
    let bc = (edge_strategy(), prop::option::of(-1.0f64..1.0), prop::option::of(-1.0f64..1.0))
        .prop_map(|(e, ux, uy)| BoundaryCondition::new(e, ux, uy));
    let out = prop_oneof![
        Just(OutputRequest::new(OutputKind::DisplacementPng)),
        Just(OutputRequest::new(OutputKind::VonMises).with_path("vm.png")),
        Just(OutputRequest::stress(StressComponent::Yy)),
        edge_strategy().prop_map(OutputRequest::traction),
    ];
    (
        any::<bool>(),
        0.1f64..10.0,
        0.1f64..10.0,
        1usize..64,
        material,
        kin,
        prop::collection::vec(bc, 0..4),
        prop::collection::vec(out, 0..4),
    )
        .prop_map(|(hole, w, h, n, material, kinematics, bcs, outputs)| ProblemSpec {
            geometry: if hole {
                GeometrySpec::with_hole(w, h, [w / 2.0, h / 2.0], 0.2 * w.min(h))
            } else {
                GeometrySpec::rectangle(w, h)
            },
            mesh: MeshSize { nx: n, ny: n + 1 },
            material,
            kinematics,
            bcs,
            outputs,
        })
}

proptest! {
    #[test]
    fn print_parse_round_trip(spec in spec_strategy()) {
        let text = print_problem(&spec);
        prop_assert_eq!(parse_problem(&text).unwrap(), spec);
    }
}
