//! One line per acceptance criterion. Every criterion is checked against the
//! running system; the target exits non-zero if any line reads FAIL.

mod invariants;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestCaseError, TestRunner};
use proptest::prelude::*;
use vnetsim::attacks::{cia_impact, AttackClass};
use vnetsim::fabric::{Attachment, Detail, EventKind, Fabric, RouteChange, TableChange, Via};
use vnetsim::modes::{Device, Mode, RouterDevice};
use vnetsim::netcore::{ArpPacket, EthernetFrame, IpAddr4, MacAddr};
use vnetsim::runner::{bundled, render_cia_table, run_scenario, RunOptions};

type Outcome = Result<String, String>;

const MAC_A: MacAddr = MacAddr::new(0x02, 0, 0, 0, 0, 0x0a);
const MAC_B: MacAddr = MacAddr::new(0x02, 0, 0, 0, 0, 0x0b);
const MAC_C: MacAddr = MacAddr::new(0x02, 0, 0, 0, 0, 0x0c);
const IP_A: IpAddr4 = IpAddr4::new(10, 0, 0, 1);
const IP_B: IpAddr4 = IpAddr4::new(10, 0, 0, 2);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Run the CLI matrix command and pull the glyph grid out of its text report.
fn cli_matrix(args: &[&str]) -> Result<(Vec<String>, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_vnetsim"))
        .arg("matrix")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(out.status.success(), format!("exit status {}", out.status))?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let grid: Vec<String> = text
        .lines()
        .skip_while(|l| !l.starts_with("Attack \\ Network Mode"))
        .take_while(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    Ok((grid, elapsed))
}

fn expect_grid(grid: &[String], expected: &[&str]) -> Result<(), String> {
    let got: Vec<&str> = grid.iter().map(String::as_str).collect();
    ensure(got == expected, format!("grid {got:?}"))
}

fn table2() -> Outcome {
    let (grid, took) = cli_matrix(&[])?;
    expect_grid(
        &grid,
        &[
            "Attack \\ Network Mode\tRouted Mode\tNAT Mode\tBridged Mode",
            "Spoofing\t-\t-\t-",
            "Sniffing\t+\t+\t-",
            "Mac Flooding\t-\t-\t-",
        ],
    )?;
    ensure(took < Duration::from_secs(5), format!("took {took:?}"))?;
    Ok(format!("9 cells exact, {} ms", took.as_millis()))
}

fn table3() -> Outcome {
    let (grid, took) = cli_matrix(&["--include-proposed"])?;
    expect_grid(
        &grid,
        &[
            "Attack \\ Network Mode\tRouted Mode\tNAT Mode\tBridged Mode\tProposed Mode",
            "Spoofing\t-\t-\t-\t+",
            "Sniffing\t+\t+\t-\t+",
            "Mac Flooding\t-\t-\t-\t+",
        ],
    )?;
    ensure(took < Duration::from_secs(5), format!("took {took:?}"))?;
    Ok(format!("12 cells exact, {} ms", took.as_millis()))
}

fn table1() -> Outcome {
    let flags = |c| {
        let i = cia_impact(c);
        (i.availability, i.integrity, i.confidentiality)
    };
    ensure(flags(AttackClass::Spoofing) == (true, true, true), "spoofing flags")?;
    ensure(flags(AttackClass::Sniffing) == (false, false, true), "sniffing flags")?;
    ensure(flags(AttackClass::MacFlooding) == (true, false, true), "flooding flags")?;
    let rendered = render_cia_table(&AttackClass::ALL);
    let want = "\tSpoofing/ Poisoning\tSniffing\tMac Flooding\n\
                Availability\tX\t\tX\n\
                Integrity\tX\t\t\n\
                Confidentiality\tX\tX\tX\n";
    ensure(rendered == want, format!("rendered {rendered:?}"))?;
    Ok("flags and X marks match".into())
}

fn poisoning() -> Outcome {
    let s = bundled("fig5_spoof_routed").map_err(|e| e.to_string())?;
    let run = run_scenario(&s, RunOptions::default()).map_err(|e| e.to_string())?;
    let updates: Vec<(IpAddr4, MacAddr, RouteChange)> = run.cells[0]
        .trace
        .iter()
        .filter(|e| e.kind == EventKind::TableUpdated)
        .filter_map(|e| match &e.detail {
            Some(Detail::Table { change: TableChange::Forwarding { ip, mac, change, .. } }) => Some((*ip, *mac, *change)),
            _ => None,
        })
        .collect();
    let first_overwrite = updates
        .iter()
        .position(|u| u.2 == RouteChange::Overwritten)
        .ok_or("no overwrite in trace")?;
    let (before, after) = updates.split_at(first_overwrite);
    let state = |rows: &[(IpAddr4, MacAddr, RouteChange)], ip| rows.iter().rev().find(|u| u.0 == ip).map(|u| u.1);
    ensure(state(before, IP_A) == Some(MAC_A), "before: IP_A")?;
    ensure(state(before, IP_B) == Some(MAC_B), "before: IP_B")?;
    ensure(state(after, IP_A) == Some(MAC_C), "after: IP_A")?;
    ensure(state(after, IP_B) == Some(MAC_C), "after: IP_B")?;
    let forged = after.iter().filter(|u| u.1 == MAC_C && u.2 == RouteChange::Overwritten).count();
    ensure(forged == 2, format!("{forged} forged overwrites"))?;
    let success = run.reports().next().is_some_and(|r| r.succeeded());
    ensure(success, "spoof verdict")?;
    Ok("A->MAC_A, B->MAC_B then both ->MAC_C".into())
}

fn vlan_example() -> Outcome {
    let s = bundled("vlan_example_sec4").map_err(|e| e.to_string())?;
    let run = run_scenario(&s, RunOptions::default()).map_err(|e| e.to_string())?;
    let outcome = |from: &str, to: &str| {
        run.cells[0]
            .traffic
            .iter()
            .find(|t| t.from == from && t.to == to)
            .cloned()
            .ok_or(format!("no traffic {from}->{to}"))
    };
    for (a, b) in [("A", "C"), ("C", "A")] {
        ensure(outcome(a, b)?.delivered, format!("{a}->{b} not delivered"))?;
    }
    for (a, b) in [("A", "B"), ("B", "A")] {
        let t = outcome(a, b)?;
        ensure(!t.delivered, format!("{a}->{b} delivered"))?;
        ensure(t.drops.iter().any(|d| d == "cross-vlan"), format!("{a}->{b} drops {:?}", t.drops))?;
    }
    Ok("A<->C delivered, A<->B cross-vlan".into())
}

/// Returns whether the probe after `forged` identities took the hub path.
fn saturates(capacity: usize, prewarm: usize, forged: usize) -> Result<bool, String> {
    let mut f = Fabric::new(Device::Router(RouterDevice::with_capacity(capacity)));
    let err = |e: vnetsim::fabric::FabricError| e.to_string();
    for i in 0..prewarm {
        let n = i as u8 + 1;
        f.attach_vm(&format!("w{i}"), MacAddr::new(2, 0, 0, 0, 1, n), IpAddr4::new(10, 0, 1, n), Attachment::plain())
            .map_err(err)?;
    }
    let x_mac = MacAddr::new(2, 0, 0, 0, 0, 0xee);
    let x_ip = IpAddr4::new(10, 0, 0, 0xee);
    f.attach_vm("X", x_mac, x_ip, Attachment::plain()).map_err(err)?;
    // A silent bystander gives the flood somewhere to go even with no fillers.
    f.attach_vm("Y", MacAddr::new(2, 0, 0, 0, 0, 0xef), IpAddr4::new(10, 0, 0, 0xef), Attachment::plain())
        .map_err(err)?;
    for i in 0..prewarm {
        let n = i as u8 + 1;
        let (mac, ip) = (MacAddr::new(2, 0, 0, 0, 1, n), IpAddr4::new(10, 0, 1, n));
        f.send(&format!("w{i}"), EthernetFrame::arp(mac, MacAddr::BROADCAST, ArpPacket::gratuitous(ip, mac)))
            .map_err(err)?;
    }
    f.run_until_idle().map_err(err)?;
    let router = f.device().as_router().ok_or("not a router")?;
    ensure(router.table().len() == prewarm, format!("prewarm left {} entries", router.table().len()))?;
    for i in 0..forged {
        let n = i as u8 + 1;
        let (mac, ip) = (MacAddr::new(2, 0xf0, 0, 0, 0, n), IpAddr4::new(10, 0, 2, n));
        f.send("X", EthernetFrame::arp(mac, MacAddr::BROADCAST, ArpPacket::gratuitous(ip, mac)))
            .map_err(err)?;
    }
    f.run_until_idle().map_err(err)?;
    let gw = f.device().as_router().ok_or("not a router")?.gateway_mac();
    let start = f.next_seq();
    let probe = EthernetFrame::ip(x_mac, gw, x_ip, IpAddr4::new(10, 0, 3, 1), b"probe".to_vec());
    f.send("X", probe).map_err(err)?;
    f.run_until_idle().map_err(err)?;
    Ok(f
        .trace()
        .iter()
        .filter(|e| e.seq >= start)
        .any(|e| e.via().is_some_and(Via::is_saturation_flood)))
}

fn saturation_sweep() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    for n in [4usize, 8, 16] {
        for k in 0..=n {
            ensure(saturates(n, k, n - k)?, format!("N={n} K={k}: {} forged did not saturate", n - k))?;
            cases += 1;
            if n > k {
                ensure(!saturates(n, k, n - k - 1)?, format!("N={n} K={k}: {} forged saturated", n - k - 1))?;
                cases += 1;
            }
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(10), format!("took {took:?}"))?;
    Ok(format!("{cases} runs, threshold exact, {} ms", took.as_millis()))
}

fn invariant_suites() -> Outcome {
    type Suite = (&'static str, fn(Mode, u64) -> invariants::Check);
    let suites: [Suite; 6] = [
        ("determinism", invariants::determinism),
        ("conservation", invariants::conservation),
        ("non-promiscuous filtering", invariants::non_promiscuous_filtering),
        ("secured vlan isolation", |_, s| invariants::secured_vlan_isolation(s)),
        ("secured no hub fallback", |_, s| invariants::secured_no_hub_fallback(s)),
        ("passive-sniff soundness", invariants::passive_sniff_soundness),
    ];
    let cases = 1000;
    for (name, check) in suites {
        let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
        let strategy = (prop::sample::select(Mode::ALL.to_vec()), any::<u64>());
        runner
            .run(&strategy, |(mode, seed)| check(mode, seed).map_err(TestCaseError::fail))
            .map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("6 suites x {cases} cases, zero violations"))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 7] = [
        ("existing-mode matrix", table2),
        ("matrix with the proposed mode", table3),
        ("security attribute table", table1),
        ("forwarding table poisoning transition", poisoning),
        ("vlan isolation example", vlan_example),
        ("saturation threshold sweep", saturation_sweep),
        ("invariant suites", invariant_suites),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                println!("FAIL criterion {}: {name} ({why})", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
