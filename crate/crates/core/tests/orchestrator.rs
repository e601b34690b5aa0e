use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use mechagents::agents::*;
use mechagents::dsl::{execute_document, OutcomeStatus};
use mechagents::orchestrator::*;
use mechagents::verify::{run_all_checks, CheckInput, Verdict};

fn run(name: &str, dir: &Path, admin: &AdminHook, store: &TranscriptStore) -> Transcript {
    let script = bundled_scenario(name).unwrap();
    run_scenario(&script, ConversationLimits::default(), dir, admin, store).unwrap()
}

fn run_quiet(name: &str) -> Transcript {
    let dir = tempfile::tempdir().unwrap();
    run(name, dir.path(), &AdminHook::auto_skip(), &TranscriptStore::memory())
}

/// Execution outcomes grouped by the round they happened in. Round
/// boundaries are the proxy's task posts.
fn outcomes_by_round(t: &Transcript, script: &ScenarioScript) -> Vec<Vec<(u64, OutcomeStatus)>> {
    let mut rounds = vec![Vec::new()];
    for m in &t.messages[1..] {
        if m.sender == Role::UserProxy && script.rounds.iter().any(|r| r.task == m.content) {
            rounds.push(Vec::new());
        }
        if let Some(o) = m.outcome() {
            rounds.last_mut().unwrap().push((m.seq, o.status));
        }
    }
    rounds
}

fn assert_well_formed(t: &Transcript) {
    for (i, m) in t.messages.iter().enumerate() {
        assert_eq!(m.seq, i as u64);
        assert_eq!(m.ts, m.seq);
        assert_eq!(m.id, format!("{}:{i}", t.conversation_id));
    }
    // Every outcome answers the document right before it.
    for (m, _) in t.outcomes() {
        let prev = &t.messages[m.seq as usize - 1];
        assert!(prev.has_dsl(), "outcome {} follows a message without a document", m.seq);
        assert!(matches!(m.sender, Role::Executor | Role::UserProxy));
    }
}

#[test]
fn first_round_needs_two_revisions() {
    let t = run_quiet("conv1_round1");
    assert_eq!(t.termination, Termination::Solved);
    assert_well_formed(&t);
    let statuses: Vec<_> = t.outcomes().map(|(_, o)| (o.status, o.codes().join(","))).collect();
    assert_eq!(
        statuses,
        [
            (OutcomeStatus::ValidationError, "MISSING_MATERIAL".to_string()),
            (OutcomeStatus::ValidationError, "TYPE_MISMATCH".to_string()),
            (OutcomeStatus::Success, String::new()),
        ]
    );
    let first = t.outcomes().next().unwrap().1.render();
    assert!(first.contains("MISSING_MATERIAL: mu, lambda"), "{first}");
    assert_eq!(t.final_outcome.as_ref().unwrap().artifacts[0].path, "displacement.png");
}

#[test]
fn five_round_conversation_misses_then_fixes_the_stress_plot() {
    let dir = tempfile::tempdir().unwrap();
    let script = bundled_scenario("conv1").unwrap();
    let t = run("conv1", dir.path(), &AdminHook::auto_skip(), &TranscriptStore::memory());
    assert_eq!(t.termination, Termination::Solved);
    assert_well_formed(&t);
    let rounds = outcomes_by_round(&t, &script);
    assert_eq!(rounds.len(), 5);
    let revisions: Vec<usize> = rounds.iter().map(|r| r.len() - 1).collect();
    assert_eq!(revisions, [2, 0, 0, 2, 0]);
    assert!(rounds.iter().all(|r| r.last().unwrap().1 == OutcomeStatus::Success));

    // Round 4 was accepted with a von Mises plot under the sigma_xy name;
    // an after-the-fact check against the round-4 task catches it, and
    // the round-5 correction passes the same check.
    let reference = script.rounds[3].reference.as_ref().unwrap();
    let check = |seq: u64| {
        let doc = extract_dsl_blocks(&t.messages[seq as usize - 1]).remove(0);
        let work = tempfile::tempdir().unwrap();
        let (spec, exec) = execute_document(&doc, work.path());
        let report = run_all_checks(&CheckInput {
            executed: spec.as_ref(),
            reference: Some(reference),
            outcome: Some(&exec.outcome),
            state: exec.state.as_ref(),
            workdir: work.path(),
        });
        report.results.iter().filter(|c| c.check_id == "output_identity").map(|c| c.verdict).collect::<Vec<_>>()
    };
    let r4 = check(rounds[3].last().unwrap().0);
    let r5 = check(rounds[4].last().unwrap().0);
    assert!(r4.contains(&Verdict::Fail), "{r4:?}");
    assert!(r5.iter().all(|v| *v == Verdict::Pass), "{r5:?}");
}

#[test]
fn hyperelastic_round_needs_one_revision() {
    let script = bundled_scenario("conv2").unwrap();
    let t = run_quiet("conv2");
    assert_eq!(t.termination, Termination::Solved);
    let rounds = outcomes_by_round(&t, &script);
    assert_eq!(rounds.iter().map(|r| r.len() - 1).collect::<Vec<_>>(), [2, 1]);
    let newton = t.final_outcome.as_ref().unwrap().newton.as_ref().expect("finite strain reports newton");
    assert_eq!(newton.load_steps.last().copied(), Some(1.0));
}

#[test]
fn rule_based_group_chat_solves_on_first_execution() {
    let t = run_quiet("groupchat1");
    assert_eq!(t.termination, Termination::Solved);
    assert_well_formed(&t);
    let order: Vec<Role> = t.messages.iter().map(|m| m.sender).collect();
    assert_eq!(
        order,
        [Role::Admin, Role::Planner, Role::Admin, Role::Scientist, Role::Engineer, Role::Executor, Role::Critic]
    );
    assert_eq!(t.outcomes().count(), 1);
    assert!(t.outcomes().next().unwrap().1.is_success());
    assert!(t.final_checks.as_ref().unwrap().passed());
    assert!(t.policy_events.is_empty());
}

#[test]
fn critic_catches_each_fault_in_order() {
    let t = run_quiet("groupchat2");
    assert_eq!(t.termination, Termination::Solved);
    assert_well_formed(&t);
    let critic: Vec<(Verdict, Vec<String>)> = t
        .by(Role::Critic)
        .map(|m| {
            let r = m.check_report().unwrap();
            (r.overall, r.failures().map(|c| c.check_id.clone()).collect())
        })
        .collect();
    let expected = [
        (Verdict::Fail, vec!["geometry_hole".to_string()]),
        (Verdict::Fail, vec!["execution_status".to_string()]),
        (Verdict::Fail, vec!["traction_nonzero".to_string()]),
        (Verdict::Pass, vec![]),
    ];
    assert_eq!(critic.len(), expected.len());
    for ((verdict, failed), (want_v, want_f)) in critic.iter().zip(&expected) {
        assert_eq!(verdict, want_v);
        assert!(want_f.iter().all(|f| failed.contains(f)), "{failed:?}");
    }
    let fx = t.final_scalars()["traction_force_x"];
    let expected = 2.0526e9;
    assert!((fx - expected).abs() / expected <= 0.15, "Fx = {fx}");
    assert!(t.final_checks.as_ref().unwrap().passed());
}

fn script(text: &str) -> ScenarioScript {
    ScenarioScript::parse(text).unwrap()
}

fn two_agent_setup(dir: &Path, limits: ConversationLimits) -> ConversationSetup {
    ConversationSetup {
        conversation_id: "t".into(),
        rounds: vec![ScenarioRound { task: "solve".into(), reference: None }],
        profiles: AgentProfile::two_agent(BackendKind::Scripted),
        limits,
        workdir: dir.to_path_buf(),
    }
}

#[test]
fn chatty_assistant_hits_the_round_limit() {
    let dir = tempfile::tempdir().unwrap();
    let s = script(
        r#"{"name":"chatty","topology":"two_agent","rounds":[{"task":"solve"}],
            "rules":[{"role":"assistant","say":"Still thinking.","repeat":true}]}"#,
    );
    let limits = ConversationLimits { max_rounds: 6, ..Default::default() };
    let t = run_two_agent(two_agent_setup(dir.path(), limits), &mut Backends::scripted(s), &AdminHook::auto_skip(), &TranscriptStore::memory()).unwrap();
    assert_eq!(t.termination, Termination::MaxRounds);
    assert_eq!(t.messages.len(), 7);
    assert!(t.by(Role::UserProxy).skip(1).all(|m| m.content.starts_with("No problem document")));
}

#[test]
fn premature_terminate_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let s = script(
        r#"{"name":"eager","topology":"two_agent","rounds":[{"task":"solve"}],
            "rules":[{"role":"assistant","say":"TERMINATE","repeat":true}]}"#,
    );
    let limits = ConversationLimits { max_rounds: 4, ..Default::default() };
    let t = run_two_agent(two_agent_setup(dir.path(), limits), &mut Backends::scripted(s), &AdminHook::auto_skip(), &TranscriptStore::memory()).unwrap();
    assert_eq!(t.termination, Termination::MaxRounds);
    assert!(t.messages[2].content.starts_with("The task is not solved yet"));
}

#[test]
fn two_agent_backend_failure_ends_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut setup = two_agent_setup(dir.path(), ConversationLimits::default());
    setup.profiles = AgentProfile::two_agent(BackendKind::Llm);
    let t = run_two_agent(setup, &mut Backends::default(), &AdminHook::auto_skip(), &TranscriptStore::memory()).unwrap();
    assert_eq!(t.termination, Termination::BackendFailure);
    assert!(t.messages.last().unwrap().content.starts_with("@manager"));
}

fn group_setup(dir: &Path, agent: BackendKind) -> ConversationSetup {
    ConversationSetup {
        conversation_id: "g".into(),
        rounds: vec![ScenarioRound { task: "solve".into(), reference: None }],
        profiles: AgentProfile::group(agent),
        limits: ConversationLimits::default(),
        workdir: dir.to_path_buf(),
    }
}

#[test]
fn group_chat_tolerates_two_backend_failures_but_not_three() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_group_chat(
        group_setup(dir.path(), BackendKind::Llm),
        SpeakerPolicy::rule_based(),
        &mut Backends::default(),
        &AdminHook::auto_skip(),
        &TranscriptStore::memory(),
    )
    .unwrap();
    assert_eq!(t.termination, Termination::BackendFailure);
    assert_eq!(t.messages.iter().filter(|m| m.content.starts_with("@manager")).count(), 3);
}

#[test]
fn executor_without_document_is_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let s = script(
        r#"{"name":"guard","topology":"group_chat","rounds":[{"task":"solve"}],
            "rules":[{"role":"critic","say":"Nothing to review yet."}]}"#,
    );
    let t = run_group_chat(
        group_setup(dir.path(), BackendKind::Scripted),
        SpeakerPolicy::scripted(vec![Role::Executor]),
        &mut Backends::scripted(s),
        &AdminHook::auto_skip(),
        &TranscriptStore::memory(),
    )
    .unwrap();
    assert_eq!(t.messages[1].sender, Role::Critic);
    assert_eq!(t.policy_events.len(), 1);
    let e = &t.policy_events[0];
    assert_eq!((e.after_seq, e.requested, e.selected), (0, Some(Role::Executor), Role::Critic));
    assert_eq!(t.outcomes().count(), 0);
    assert_eq!(t.termination, Termination::ScriptExhausted);
}

fn msg(seq: u64, sender: Role, content: &str) -> Message {
    Message { id: format!("c:{seq}"), seq, conversation_id: "c".into(), sender, content: content.into(), attachments: vec![], ts: seq }
}

#[test]
fn consecutive_reply_cap() {
    let limits = ConversationLimits { max_consecutive_auto_replies: 2, ..Default::default() };
    let history = [msg(0, Role::Admin, "task"), msg(1, Role::Engineer, "a"), msg(2, Role::Engineer, "b")];
    let (r, why) = enforce_policy(Role::Engineer, &history, &limits);
    assert_eq!(r, Role::Critic);
    assert!(why.unwrap().contains("2 times"));
    assert_eq!(enforce_policy(Role::Engineer, &history[..2], &limits), (Role::Engineer, None));

    let critics = [msg(0, Role::Critic, "a"), msg(1, Role::Critic, "b")];
    assert_eq!(enforce_policy(Role::Critic, &critics, &limits).0, Role::Engineer);
    // An unwanted executor pick lands on the critic, which is then capped.
    assert_eq!(enforce_policy(Role::Executor, &critics, &limits).0, Role::Engineer);
}

#[test]
fn rule_based_transitions() {
    let group = AgentProfile::group(BackendKind::Scripted);
    let next = |h: &[Message]| rule_based_speaker(h, &group);
    assert_eq!(next(&[]), Role::Planner);
    let task = msg(0, Role::Admin, "task");
    assert_eq!(next(std::slice::from_ref(&task)), Role::Planner);
    let plan = msg(1, Role::Planner, "plan");
    assert_eq!(next(&[task.clone(), plan.clone()]), Role::Admin);
    assert_eq!(next(&[task.clone(), plan.clone(), msg(2, Role::Admin, "")]), Role::Scientist);
    assert_eq!(next(&[task.clone(), plan.clone(), msg(2, Role::Admin, "approve")]), Role::Scientist);
    assert_eq!(next(&[task.clone(), plan.clone(), msg(2, Role::Admin, "revise: more detail")]), Role::Planner);
    assert_eq!(next(&[task.clone(), msg(1, Role::Scientist, "x")]), Role::Engineer);
    let doc = msg(2, Role::Engineer, "```mechagents-dsl\n{}\n```");
    assert_eq!(next(&[task.clone(), doc]), Role::Executor);
    assert_eq!(next(&[task.clone(), msg(2, Role::Engineer, "prose")]), Role::Critic);
    assert_eq!(next(&[task.clone(), msg(3, Role::Executor, "out")]), Role::Critic);
    assert_eq!(next(&[task, msg(3, Role::Critic, "no report")]), Role::Engineer);
}

#[test]
fn manager_choice_parsing() {
    let c = [Role::Planner, Role::Engineer, Role::Critic];
    assert_eq!(parse_manager_choice("engineer", &c), Some(Role::Engineer));
    assert_eq!(parse_manager_choice("Next: Critic.", &c), Some(Role::Critic));
    assert_eq!(parse_manager_choice("manager", &c), None);
    assert_eq!(parse_manager_choice("nobody", &c), None);
}

#[test]
fn unparseable_manager_falls_back_to_rules() {
    let base = bundled_scenario("groupchat1").unwrap();
    let mut s = base.clone();
    s.rules.push(Rule {
        role: Role::Manager,
        when: Trigger::default(),
        say: "Let us see who is free.".into(),
        dsl: None,
        dsl_text: None,
        repeat: true,
    });
    let dir = tempfile::tempdir().unwrap();
    let setup = ConversationSetup {
        conversation_id: "llm-selected".into(),
        rounds: s.rounds.clone(),
        profiles: AgentProfile::group(BackendKind::Scripted),
        limits: ConversationLimits::default(),
        workdir: dir.path().to_path_buf(),
    };
    let t = run_group_chat(setup, SpeakerPolicy::llm_selected(), &mut Backends::scripted(s), &AdminHook::auto_skip(), &TranscriptStore::memory()).unwrap();
    let rule_based = run_quiet("groupchat1");
    assert_eq!(t.termination, Termination::Solved);
    let senders = |t: &Transcript| t.messages.iter().map(|m| m.sender).collect::<Vec<_>>();
    assert_eq!(senders(&t), senders(&rule_based));
    assert_eq!(t.policy_events.len(), t.messages.len() - 1);
    assert!(t.policy_events.iter().all(|e| e.requested.is_none() && e.reason.contains("fallback")));
}

#[test]
fn interactive_admin_input_is_posted() {
    let dir = tempfile::tempdir().unwrap();
    let admin = Arc::new(AdminHook::new(AdminMode::Interactive, Duration::from_secs(20)));
    let feeder = {
        let admin = admin.clone();
        thread::spawn(move || {
            while !admin.awaiting_input() {
                thread::sleep(Duration::from_millis(5));
            }
            admin.submit(AdminAction::Approve);
            // Second admin turn, after the critic passes.
            while admin.pending() > 0 || !admin.awaiting_input() {
                thread::sleep(Duration::from_millis(5));
            }
            admin.submit(AdminAction::Approve);
        })
    };
    let script = bundled_scenario("groupchat1").unwrap();
    let mut s = script.clone();
    // Let the critic hand over to the admin instead of terminating itself.
    for r in s.rules.iter_mut().filter(|r| r.role == Role::Critic) {
        r.say = r.say.replace("TERMINATE", "").trim_end().to_string();
    }
    let t = run_scenario(&s, ConversationLimits::default(), dir.path(), &admin, &TranscriptStore::memory()).unwrap();
    feeder.join().unwrap();
    assert_eq!(t.termination, Termination::Solved);
    let admin_posts: Vec<&str> = t.by(Role::Admin).skip(1).map(|m| m.content.as_str()).collect();
    assert_eq!(admin_posts, ["approve", "approve"]);
    assert_eq!(t.messages.last().unwrap().sender, Role::Admin);
}

#[test]
fn admin_abort_stops_the_chat() {
    let dir = tempfile::tempdir().unwrap();
    let admin = AdminHook::auto_skip();
    // Queued before the first admin turn; delivered when the admin speaks.
    admin.submit(AdminAction::Abort);
    let t = run("groupchat1", dir.path(), &admin, &TranscriptStore::memory());
    assert_eq!(t.termination, Termination::HumanAbort);
    assert_eq!(t.messages.last().unwrap().content, "abort");
    assert_eq!(t.messages.len(), 3);
}

#[test]
fn queued_revision_reaches_the_planner() {
    let dir = tempfile::tempdir().unwrap();
    let admin = AdminHook::auto_skip();
    admin.submit(AdminAction::Revise("state the mesh size".into()));
    let mut s = bundled_scenario("groupchat1").unwrap();
    let planner = s.rules.iter().find(|r| r.role == Role::Planner).unwrap().clone();
    s.rules.push(Rule { when: Trigger { contains: Some("revise".into()), ..Default::default() }, say: "Revised plan.".into(), ..planner });
    let t = run_scenario(&s, ConversationLimits::default(), dir.path(), &admin, &TranscriptStore::memory()).unwrap();
    assert_eq!(t.messages[2].content, "revise: state the mesh size");
    assert_eq!((t.messages[3].sender, t.messages[3].content.as_str()), (Role::Planner, "Revised plan."));
    assert_eq!(t.termination, Termination::Solved);
    assert_eq!(admin.pending(), 0);
}

#[test]
fn auto_skip_never_blocks() {
    let admin = AdminHook::auto_skip();
    let t0 = std::time::Instant::now();
    assert_eq!(admin.admin_input("approve plan?"), None);
    assert!(t0.elapsed() < Duration::from_millis(50));
    let timed = AdminHook::new(AdminMode::Interactive, Duration::from_millis(30));
    assert_eq!(timed.admin_input("approve plan?"), None);
    assert!(!timed.awaiting_input());
}

#[test]
fn file_store_replays_to_the_same_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transcript.jsonl");
    let store = TranscriptStore::create(&path).unwrap();
    let t = run("groupchat2", dir.path(), &AdminHook::auto_skip(), &store);
    let back = replay(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(store.transcript().unwrap(), t);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), t.messages.len() + 1);
    assert!(store.is_closed());
}

#[test]
fn replay_rejects_truncated_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let store = TranscriptStore::create(&path).unwrap();
    run("conv1_round1", dir.path(), &AdminHook::auto_skip(), &store);
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: Vec<&str> = text.lines().collect();
    assert!(transcript_from_lines(cut[..cut.len() - 1].iter().copied()).is_err());
    assert!(transcript_from_lines(["{not json"]).is_err());
}

#[test]
fn concurrent_readers_see_prefixes() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(TranscriptStore::memory());
    let mut rx = store.subscribe();
    let reader = {
        let store = store.clone();
        thread::spawn(move || {
            let mut seen: Vec<Vec<Arc<str>>> = Vec::new();
            let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
            rt.block_on(async {
                loop {
                    seen.push(store.snapshot(0));
                    if store.is_closed() || rx.changed().await.is_err() {
                        break;
                    }
                }
            });
            seen.push(store.snapshot(0));
            seen
        })
    };
    let t = run("conv1_round1", dir.path(), &AdminHook::auto_skip(), &store);
    let seen = reader.join().unwrap();
    let all = store.snapshot(0);
    assert_eq!(all.len(), t.messages.len() + 1);
    for snap in &seen {
        assert_eq!(snap[..], all[..snap.len()]);
    }
    assert_eq!(seen.last().unwrap().len(), all.len());
    assert_eq!(store.snapshot(3)[..], all[3..]);
}

#[test]
fn replays_are_byte_identical() {
    let bytes = |name: &str| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let store = TranscriptStore::create(&path).unwrap();
        run(name, dir.path(), &AdminHook::auto_skip(), &store);
        std::fs::read(&path).unwrap()
    };
    for name in ["conv1_round1", "groupchat2"] {
        assert_eq!(bytes(name), bytes(name), "{name}");
    }
}

#[test]
fn executor_reports_divergence_with_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"geometry": {"kind": "rectangle", "width": 1.0, "height": 1.0}, "mesh": {"nx": 8, "ny": 8},
      "material": {"model": "neo_hookean", "E": 1e9, "nu": 0.3},
      "kinematics": {"mode": "finite_strain", "newton": {"load_stepping": false, "max_iters": 8}},
      "bcs": [{"edge": "left", "ux": 0.0, "uy": 0.0}, {"edge": "right", "ux": 5.0, "uy": 0.0}],
      "outputs": [{"kind": "displacement_png", "path": "d.png"}]}"#;
    let m = msg(1, Role::Engineer, &format!("```mechagents-dsl\n{doc}\n```"));
    let r = executor_turn(&m, dir.path());
    let outcome = r.execution.unwrap().outcome;
    assert_eq!(outcome.status, OutcomeStatus::SolverError);
    let code = outcome.codes()[0].to_string();
    assert!(code == "DIVERGENCE" || code == "INVERTED_ELEMENT", "{code}");
    if code == "DIVERGENCE" {
        assert!(r.reply.content.contains("residual history"));
    }
    assert!(!dir.path().join("d.png").exists());
}

#[test]
fn executor_reports_missing_material_and_extra_documents() {
    let dir = tempfile::tempdir().unwrap();
    let doc = r#"{"geometry": {"kind": "rectangle", "width": 1.0, "height": 1.0}, "mesh": {"nx": 4, "ny": 4},
      "kinematics": "small_strain",
      "bcs": [{"edge": "left", "ux": 0.0, "uy": 0.0}, {"edge": "right", "ux": 0.1, "uy": 0.0}],
      "outputs": [{"kind": "displacement_png", "path": "d.png"}]}"#;
    let block = format!("```mechagents-dsl\n{doc}\n```");
    let m = msg(1, Role::Engineer, &format!("{block}\n{block}"));
    let r = executor_turn(&m, dir.path());
    assert!(r.reply.content.contains("MISSING_MATERIAL: mu, lambda"), "{}", r.reply.content);
    assert!(r.reply.attachments.iter().any(|a| matches!(a, Attachment::LintNote(n) if n.contains("2 documents"))));

    let none = executor_turn(&msg(1, Role::Engineer, "no code"), dir.path());
    assert!(none.execution.is_none());
}

#[test]
fn setup_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let mut setup = group_setup(dir.path(), BackendKind::Scripted);
    setup.profiles.retain(|p| p.role != Role::Executor);
    let err = run_group_chat(setup, SpeakerPolicy::rule_based(), &mut Backends::default(), &AdminHook::auto_skip(), &TranscriptStore::memory());
    assert!(err.is_err());
    let setup = group_setup(dir.path(), BackendKind::Scripted);
    let err = run_group_chat(setup, SpeakerPolicy::scripted(vec![]), &mut Backends::default(), &AdminHook::auto_skip(), &TranscriptStore::memory());
    assert!(err.is_err());
    let limits = ConversationLimits { max_rounds: 0, ..Default::default() };
    assert!(run_two_agent(two_agent_setup(dir.path(), limits), &mut Backends::default(), &AdminHook::auto_skip(), &TranscriptStore::memory()).is_err());
}
