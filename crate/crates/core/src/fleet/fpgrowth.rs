//! FP-growth frequent-itemset mining and single-antecedent rule generation
//! over per-app label transactions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Label;

/// Default thresholds for fleet-scale mining: a rule needs at least 500
/// supporting apps and confidence strictly above 0.8.
pub const DEFAULT_MIN_SUPPORT_APPS: usize = 500;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.8;

/// `antecedent ⇒ consequent` with its app counts and confidence
/// (= joint / antecedent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Label,
    pub consequent: Label,
    pub antecedent_apps: usize,
    pub joint_apps: usize,
    pub confidence: f64,
}

#[derive(Debug)]
struct Node {
    item: Label,
    count: usize,
    parent: usize,
    children: BTreeMap<Label, usize>,
}

struct Tree {
    nodes: Vec<Node>,
    /// All node indices per item, for conditional pattern bases.
    header: BTreeMap<Label, Vec<usize>>,
    /// Insertion order: higher first.
    rank: BTreeMap<Label, usize>,
}

impl Tree {
    fn build(transactions: &[(Vec<Label>, usize)], min_support: usize) -> Tree {
        let mut counts: BTreeMap<Label, usize> = BTreeMap::new();
        for (items, weight) in transactions {
            for item in items {
                *counts.entry(*item).or_default() += weight;
            }
        }
        let mut frequent: Vec<(Label, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_support)
            .collect();
        // Descending count, ascending label: a stable global insertion order.
        frequent.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let rank: BTreeMap<Label, usize> = frequent
            .iter()
            .enumerate()
            .map(|(i, &(l, _))| (l, i))
            .collect();

        let root = Node {
            item: (
                crate::taxonomy::VulnId::new(1).unwrap(),
                crate::taxonomy::SinkCategory::FILE,
            ),
            count: 0,
            parent: usize::MAX,
            children: BTreeMap::new(),
        };
        let mut tree = Tree {
            nodes: vec![root],
            header: BTreeMap::new(),
            rank,
        };

        for (items, weight) in transactions {
            let mut sorted: Vec<Label> = items
                .iter()
                .copied()
                .filter(|l| tree.rank.contains_key(l))
                .collect();
            sorted.sort_by_key(|l| tree.rank[l]);
            tree.insert(&sorted, *weight);
        }
        tree
    }

    fn insert(&mut self, items: &[Label], weight: usize) {
        let mut at = 0;
        for &item in items {
            let next = match self.nodes[at].children.get(&item) {
                Some(&idx) => idx,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(Node {
                        item,
                        count: 0,
                        parent: at,
                        children: BTreeMap::new(),
                    });
                    self.nodes[at].children.insert(item, idx);
                    self.header.entry(item).or_default().push(idx);
                    idx
                }
            };
            self.nodes[next].count += weight;
            at = next;
        }
    }

    /// Prefix paths reaching each node of `item`, with that node's count.
    fn pattern_base(&self, item: Label) -> Vec<(Vec<Label>, usize)> {
        let mut base = Vec::new();
        for &idx in self.header.get(&item).into_iter().flatten() {
            let count = self.nodes[idx].count;
            let mut path = Vec::new();
            let mut at = self.nodes[idx].parent;
            while at != 0 && at != usize::MAX {
                path.push(self.nodes[at].item);
                at = self.nodes[at].parent;
            }
            path.reverse();
            base.push((path, count));
        }
        base
    }

    fn item_support(&self, item: Label) -> usize {
        self.header
            .get(&item)
            .map(|nodes| nodes.iter().map(|&i| self.nodes[i].count).sum())
            .unwrap_or(0)
    }

    fn items(&self) -> Vec<Label> {
        self.header.keys().copied().collect()
    }
}

fn grow(tree: &Tree, suffix: &[Label], min_support: usize, out: &mut BTreeMap<Vec<Label>, usize>) {
    for item in tree.items() {
        let support = tree.item_support(item);
        if support < min_support {
            continue;
        }
        let mut itemset: Vec<Label> = suffix.to_vec();
        itemset.push(item);
        itemset.sort();
        out.insert(itemset.clone(), support);

        let base = tree.pattern_base(item);
        let conditional = Tree::build(&base, min_support);
        if !conditional.header.is_empty() {
            grow(&conditional, &itemset, min_support, out);
        }
    }
}

/// All itemsets occurring in at least `min_support` transactions, with their
/// support counts, keyed by the sorted itemset.
pub fn frequent_itemsets(
    transactions: &[BTreeSet<Label>],
    min_support: usize,
) -> BTreeMap<Vec<Label>, usize> {
    assert!(min_support >= 1, "support threshold must be at least 1");
    let weighted: Vec<(Vec<Label>, usize)> = transactions
        .iter()
        .map(|t| (t.iter().copied().collect(), 1))
        .collect();
    let tree = Tree::build(&weighted, min_support);
    let mut out = BTreeMap::new();
    grow(&tree, &[], min_support, &mut out);
    out
}

/// Mines single-antecedent → single-consequent rules: both labels must
/// co-occur in at least `min_support_apps` transactions and the confidence
/// must exceed `min_conf` strictly. Output is sorted by descending
/// confidence, then antecedent, then consequent.
pub fn mine_rules(
    transactions: &[BTreeSet<Label>],
    min_support_apps: usize,
    min_conf: f64,
) -> Vec<AssociationRule> {
    assert!(
        min_support_apps >= 1,
        "support threshold must be at least 1"
    );
    assert!(
        min_conf > 0.0 && min_conf <= 1.0,
        "confidence threshold must be in (0, 1]"
    );
    if transactions.is_empty() {
        return Vec::new();
    }
    let itemsets = frequent_itemsets(transactions, min_support_apps);
    let mut rules = Vec::new();
    for (itemset, &joint) in itemsets.iter().filter(|(set, _)| set.len() == 2) {
        let (a, b) = (itemset[0], itemset[1]);
        for (antecedent, consequent) in [(a, b), (b, a)] {
            let antecedent_apps = itemsets[&vec![antecedent]];
            let confidence = joint as f64 / antecedent_apps as f64;
            if antecedent_apps >= min_support_apps && confidence > min_conf {
                rules.push(AssociationRule {
                    antecedent,
                    consequent,
                    antecedent_apps,
                    joint_apps: joint,
                    confidence,
                });
            }
        }
    }
    rules.sort_by(|x, y| {
        y.confidence
            .partial_cmp(&x.confidence)
            .unwrap()
            .then_with(|| x.antecedent.cmp(&y.antecedent))
            .then_with(|| x.consequent.cmp(&y.consequent))
    });
    rules
}
