//! Ordered, first-match-wins drop/allow policy.

use serde::{Deserialize, Serialize};

use crate::fabric::{DropReason, PortId};
use crate::netcore::{FrameKind, VlanTag};

/// Outcome of a binding check on the frame being filtered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Violated,
}

impl Verdict {
    pub fn from_violation(violated: bool) -> Self {
        if violated {
            Verdict::Violated
        } else {
            Verdict::Consistent
        }
    }
}

/// Where the destination MAC lives relative to the ingress VLAN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DstVlan {
    Same,
    Different,
    /// Broadcast, or not yet in the CAM table.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirewallContext {
    pub ingress_port: PortId,
    pub vlan: VlanTag,
    pub kind: FrameKind,
    /// ARP sender against the administrator's IP/MAC registry.
    pub registry: Verdict,
    /// Frame and ARP sender MACs against locked CAM bindings.
    pub lock: Verdict,
    pub dst_vlan: DstVlan,
}

/// Conjunction of optional field tests. An empty match hits everything.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleMatch {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ingress_port: Option<PortId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vlan: Option<VlanTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<FrameKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registry: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lock: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dst_vlan: Option<DstVlan>,
}

impl RuleMatch {
    pub fn matches(&self, ctx: &FirewallContext) -> bool {
        fn test<T: PartialEq>(want: &Option<T>, got: T) -> bool {
            want.as_ref().is_none_or(|w| *w == got)
        }
        test(&self.ingress_port, ctx.ingress_port)
            && test(&self.vlan, ctx.vlan)
            && test(&self.kind, ctx.kind)
            && test(&self.registry, ctx.registry)
            && test(&self.lock, ctx.lock)
            && test(&self.dst_vlan, ctx.dst_vlan)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Allow,
    Drop(DropReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub name: String,
    #[serde(default)]
    pub when: RuleMatch,
    pub action: Action,
}

impl Rule {
    pub fn new(name: impl Into<String>, when: RuleMatch, action: Action) -> Self {
        Rule {
            name: name.into(),
            when,
            action,
        }
    }
}

/// The decision plus the rule that made it (`None` for the default action).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    pub rule: Option<String>,
}

/// Mandatory anti-tamper and isolation rules, then operator rules, then the
/// intra-VLAN allows. Anything left over is denied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirewallRuleSet {
    mandatory: Vec<Rule>,
    extra: Vec<Rule>,
    tail: Vec<Rule>,
}

impl Default for FirewallRuleSet {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl FirewallRuleSet {
    pub const DEFAULT_ACTION: Action = Action::Drop(DropReason::DefaultDeny);

    pub fn new(extra: Vec<Rule>) -> Self {
        let mandatory = vec![
            Rule::new(
                "cam-tamper",
                RuleMatch {
                    lock: Some(Verdict::Violated),
                    ..Default::default()
                },
                Action::Drop(DropReason::CamTamper),
            ),
            Rule::new(
                "registry-mismatch",
                RuleMatch {
                    registry: Some(Verdict::Violated),
                    ..Default::default()
                },
                Action::Drop(DropReason::RegistryMismatch),
            ),
            Rule::new(
                "cross-vlan",
                RuleMatch {
                    dst_vlan: Some(DstVlan::Different),
                    ..Default::default()
                },
                Action::Drop(DropReason::CrossVlan),
            ),
        ];
        let tail = [(DstVlan::Same, "allow-intra-vlan"), (DstVlan::Unresolved, "allow-vlan-flood")]
            .into_iter()
            .map(|(d, name)| {
                Rule::new(
                    name,
                    RuleMatch {
                        dst_vlan: Some(d),
                        ..Default::default()
                    },
                    Action::Allow,
                )
            })
            .collect();
        FirewallRuleSet {
            mandatory,
            extra,
            tail,
        }
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.mandatory.iter().chain(&self.extra).chain(&self.tail)
    }

    pub fn extra_rules(&self) -> &[Rule] {
        &self.extra
    }

    pub fn push(&mut self, rule: Rule) {
        self.extra.push(rule);
    }

    pub fn evaluate(&self, ctx: &FirewallContext) -> Decision {
        self.rules()
            .find(|r| r.when.matches(ctx))
            .map(|r| Decision {
                action: r.action.clone(),
                rule: Some(r.name.clone()),
            })
            .unwrap_or(Decision {
                action: Self::DEFAULT_ACTION,
                rule: None,
            })
    }
}

pub fn firewall_eval(ruleset: &FirewallRuleSet, ctx: &FirewallContext) -> Action {
    ruleset.evaluate(ctx).action
}
