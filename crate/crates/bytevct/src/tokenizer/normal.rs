use rustc_hash::FxHashMap;

use super::MergeRule;
use crate::TokenId;

const NONE: u32 = u32::MAX;

/// Rewrites a raw merge list into normal form: one forming merge per token,
/// every kept token reachable, inputs formed before the merges using them.
///
/// `vocab[i]` holds the bytes of token `i`; empty entries (specials) are
/// skipped. Returns the normalized merges (ranks dense from 0) and the
/// tokens that heap-style BPE cannot produce from their own bytes.
pub fn normalize_merge_list(raw: &[MergeRule], vocab: &[Vec<u8>]) -> (Vec<MergeRule>, Vec<TokenId>) {
    // a repeated pair keeps its last position, like the reference loader
    let mut pair: FxHashMap<(TokenId, TokenId), (u32, TokenId)> = FxHashMap::default();
    for (i, m) in raw.iter().enumerate() {
        pair.insert((m.left, m.right), (i as u32, m.result));
    }
    let list = raw;
    let mut byte_token = [NONE; 256];
    for (i, t) in vocab.iter().enumerate() {
        if t.len() == 1 {
            byte_token[t[0] as usize] = i as TokenId;
        }
    }

    // heap-style run on each token's own bytes; the merge that closes it is kept
    let mut kept: Vec<u32> = vec![NONE; vocab.len()];
    let mut unreachable = Vec::new();
    let mut parts: Vec<(TokenId, u32)> = Vec::new();
    for (i, t) in vocab.iter().enumerate() {
        if t.len() < 2 {
            continue;
        }
        parts.clear();
        if t.iter().any(|&b| byte_token[b as usize] == NONE) {
            unreachable.push(i as TokenId);
            continue;
        }
        parts.extend(t.iter().map(|&b| (byte_token[b as usize], NONE)));
        loop {
            let mut best = (NONE, 0);
            for k in 0..parts.len() - 1 {
                if let Some(&(r, _)) = pair.get(&(parts[k].0, parts[k + 1].0)) {
                    if r < best.0 {
                        best = (r, k);
                    }
                }
            }
            if best.0 == NONE {
                break;
            }
            let (r, k) = best;
            parts[k] = (list[r as usize].result, r);
            parts.remove(k + 1);
        }
        if parts.len() == 1 && parts[0].0 == i as TokenId {
            kept[i] = parts[0].1;
        } else {
            unreachable.push(i as TokenId);
        }
    }

    // relocation keys: inputs' keys, extended when an input forms later
    let mut order: Vec<TokenId> = (0..vocab.len() as TokenId).filter(|&t| kept[t as usize] != NONE).collect();
    order.sort_by_key(|&t| vocab[t as usize].len());
    let mut key: Vec<Option<Vec<u32>>> = vec![None; vocab.len()];
    for &t in &byte_token {
        if t != NONE {
            key[t as usize] = Some(Vec::new());
        }
    }
    for &t in &order {
        let m = list[kept[t as usize] as usize];
        let kl = key[m.left as usize].as_ref().expect("input formed earlier");
        let kr = key[m.right as usize].as_ref().expect("input formed earlier");
        let dep = kl.max(kr);
        let orig = kept[t as usize];
        let k = if dep.as_slice() < [orig].as_slice() {
            vec![orig]
        } else {
            let mut k = dep.clone();
            k.push(orig);
            k
        };
        key[t as usize] = Some(k);
    }
    order.sort_by(|a, b| key[*a as usize].cmp(&key[*b as usize]));
    let merges = order
        .iter()
        .enumerate()
        .map(|(rank, &t)| {
            let m = list[kept[t as usize] as usize];
            MergeRule { rank: rank as u32, ..m }
        })
        .collect();
    (merges, unreachable)
}
