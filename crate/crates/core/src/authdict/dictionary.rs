//! Append-only dictionary of revoked serials.

use std::collections::HashSet;

use super::digest::Digest;
use super::serial::{CaId, Leaf, SerialNumber};
use super::signing::{CaPublicKey, FreshnessStatement, SignedRoot, MAX_CLOCK_SKEW};
use super::status::{MembershipProof, ProofKind, RevocationStatus};
use super::tree::{common_ancestor_level, MerkleTree};
use super::{DictError, UpdateError};

/// One CA's revocations. Values are immutable; `insert` and `update`
/// return a new version so readers can hold a consistent snapshot.
#[derive(Clone, Debug)]
pub struct Dictionary {
    ca_id: CaId,
    /// Sorted by serial bytes.
    leaves: Vec<Leaf>,
    /// Serials in revocation order; `in_order[i]` has index `i + 1`.
    in_order: Vec<SerialNumber>,
    tree: MerkleTree,
}

impl Dictionary {
    pub fn new(ca_id: CaId) -> Self {
        Dictionary {
            ca_id,
            leaves: Vec::new(),
            in_order: Vec::new(),
            tree: MerkleTree::default(),
        }
    }

    pub fn ca_id(&self) -> CaId {
        self.ca_id
    }

    pub fn len(&self) -> u64 {
        self.leaves.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn root(&self) -> Digest {
        self.tree.root()
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    /// Serials in revocation (index) order.
    pub fn serials_in_order(&self) -> &[SerialNumber] {
        &self.in_order
    }

    pub fn contains(&self, serial: &SerialNumber) -> bool {
        self.search(serial).is_ok()
    }

    fn search(&self, serial: &SerialNumber) -> Result<usize, usize> {
        self.leaves.binary_search_by(|l| l.serial.cmp(serial))
    }

    /// Appends `serials` with consecutive indexes and rebuilds the tree.
    pub fn insert(&self, serials: &[SerialNumber]) -> Result<Dictionary, DictError> {
        let mut seen = HashSet::with_capacity(serials.len());
        for s in serials {
            if self.contains(s) || !seen.insert(s) {
                return Err(DictError::DuplicateSerial(s.clone()));
            }
        }
        let base = self.len();
        let mut fresh: Vec<(Leaf, Digest)> = serials
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let leaf = Leaf::new(s.clone(), base + i as u64 + 1);
                let h = leaf.hash();
                (leaf, h)
            })
            .collect();
        fresh.sort_unstable_by(|a, b| a.0.serial.cmp(&b.0.serial));
        let unchanged = fresh.first().map_or(self.leaves.len(), |(l, _)| self.search(&l.serial).unwrap_err());

        // merge, reusing the hashes of leaves already in the tree
        let total = self.leaves.len() + fresh.len();
        let mut leaves = Vec::with_capacity(total);
        let mut hashes = Vec::with_capacity(total);
        leaves.extend_from_slice(&self.leaves[..unchanged]);
        hashes.extend_from_slice(&self.tree.leaf_hashes()[..unchanged]);
        let mut old = self.leaves[unchanged..].iter().zip(&self.tree.leaf_hashes()[unchanged..]).peekable();
        let mut new = fresh.into_iter().peekable();
        loop {
            let take_old = match (old.peek(), new.peek()) {
                (Some((o, _)), Some((n, _))) => o.serial < n.serial,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            if take_old {
                let (l, h) = old.next().unwrap();
                leaves.push(l.clone());
                hashes.push(*h);
            } else {
                let (l, h) = new.next().unwrap();
                leaves.push(l);
                hashes.push(h);
            }
        }
        let mut in_order = self.in_order.clone();
        in_order.extend_from_slice(serials);
        Ok(Dictionary {
            ca_id: self.ca_id,
            leaves,
            in_order,
            tree: self.tree.rebuild(hashes, unchanged),
        })
    }

    /// Builds a dictionary from serials in revocation order.
    pub fn from_serials(ca_id: CaId, serials: &[SerialNumber]) -> Result<Dictionary, DictError> {
        Dictionary::new(ca_id).insert(serials)
    }

    /// Builds a presence or absence proof for `serial` and bundles it with
    /// the signed root and latest freshness statement.
    pub fn prove(
        &self,
        serial: &SerialNumber,
        sr: &SignedRoot,
        fs: &FreshnessStatement,
    ) -> Result<RevocationStatus, DictError> {
        if sr.root != self.root() || sr.n != self.len() || sr.ca_id != self.ca_id {
            return Err(DictError::DictRootMismatch);
        }
        let proof = match self.search(serial) {
            Ok(i) => MembershipProof {
                kind: ProofKind::Present,
                leaves: vec![self.leaves[i].clone()],
                paths: vec![self.tree.path(i as u64)],
            },
            Err(_) if self.leaves.is_empty() => MembershipProof {
                kind: ProofKind::Absent,
                leaves: vec![],
                paths: vec![],
            },
            Err(0) => self.single_bracket(0),
            Err(ins) if ins == self.leaves.len() => self.single_bracket(ins - 1),
            Err(ins) => {
                let (left, right) = (ins as u64 - 1, ins as u64);
                let h = common_ancestor_level(left, right);
                MembershipProof {
                    kind: ProofKind::Absent,
                    leaves: vec![self.leaves[ins - 1].clone(), self.leaves[ins].clone()],
                    paths: vec![self.tree.path(left), self.tree.path_below(right, h - 1)],
                }
            }
        };
        Ok(RevocationStatus {
            proof,
            signed_root: sr.clone(),
            freshness: *fs,
        })
    }

    fn single_bracket(&self, pos: usize) -> MembershipProof {
        MembershipProof {
            kind: ProofKind::Absent,
            leaves: vec![self.leaves[pos].clone()],
            paths: vec![self.tree.path(pos as u64)],
        }
    }

    /// Replica storage: `ca_id(8) ‖ count(8) ‖ (len(1) ‖ serial)*` in
    /// revocation order. Indexes are implicit.
    pub fn to_storage_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.in_order.iter().map(|s| s.len() + 1).sum::<usize>());
        out.extend_from_slice(&self.ca_id.0);
        out.extend_from_slice(&self.len().to_be_bytes());
        for s in &self.in_order {
            s.encode_into(&mut out);
        }
        out
    }

    pub fn from_storage_bytes(buf: &[u8]) -> Result<Dictionary, DictError> {
        if buf.len() < 16 {
            return Err(DictError::BadStorage("truncated header".into()));
        }
        let ca_id = CaId(buf[0..8].try_into().unwrap());
        let count = u64::from_be_bytes(buf[8..16].try_into().unwrap());
        let mut rest = &buf[16..];
        let mut serials = Vec::with_capacity(count.min(1 << 24) as usize);
        for _ in 0..count {
            let (s, r) = SerialNumber::decode_prefix(rest)?;
            serials.push(s);
            rest = r;
        }
        if !rest.is_empty() {
            return Err(DictError::BadStorage("trailing bytes".into()));
        }
        Dictionary::from_serials(ca_id, &serials)
    }
}

/// RA-side replica update: verifies `sr`, applies `serials`, and accepts
/// the result only if it reproduces `sr.root` and `sr.n`. The input
/// dictionary is never modified.
pub fn update(
    copy: &Dictionary,
    current: Option<&SignedRoot>,
    serials: &[SerialNumber],
    sr: &SignedRoot,
    ca_key: &CaPublicKey,
    now: u64,
) -> Result<Dictionary, UpdateError> {
    if sr.ca_id != copy.ca_id() {
        return Err(UpdateError::WrongCa);
    }
    if !sr.verify(ca_key) {
        return Err(UpdateError::BadSignature);
    }
    if sr.timestamp > now + MAX_CLOCK_SKEW {
        return Err(UpdateError::FutureTimestamp);
    }
    if let Some(cur) = current {
        if sr.timestamp < cur.timestamp || (serials.is_empty() && sr.timestamp == cur.timestamp) {
            return Err(UpdateError::StaleTimestamp);
        }
    }
    if copy.len() + serials.len() as u64 != sr.n {
        return Err(UpdateError::CountMismatch {
            expected: sr.n,
            got: copy.len() + serials.len() as u64,
        });
    }
    let next = copy.insert(serials).map_err(|e| match e {
        DictError::DuplicateSerial(s) => UpdateError::DuplicateSerial(s),
        _ => UpdateError::RootMismatch,
    })?;
    if next.root() != sr.root {
        return Err(UpdateError::RootMismatch);
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::authdict::signing::{make_signed_root, CaSigningKey};
    use crate::authdict::tree::node_hash;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sn(v: u64) -> SerialNumber {
        SerialNumber::from_u64(v)
    }

    #[test]
    fn single_insert_root_is_leaf_hash() {
        let d = Dictionary::new(CaId::from_u64(1)).insert(&[sn(3)]).unwrap();
        assert_eq!(d.len(), 1);
        // Leaf(0x03, 1) = H(00 ‖ 01 03 ‖ 00..01)
        let mut pre = vec![0x00, 0x01, 0x03];
        pre.extend_from_slice(&1u64.to_be_bytes());
        assert_eq!(d.root(), crate::authdict::hash(&pre));
    }

    #[test]
    fn batch_sorted_by_serial_indexed_by_order() {
        let d = Dictionary::new(CaId::from_u64(1)).insert(&[sn(5), sn(2)]).unwrap();
        assert_eq!(d.leaves(), &[Leaf::new(sn(2), 2), Leaf::new(sn(5), 1)]);
        let expect = node_hash(&Leaf::new(sn(2), 2).hash(), &Leaf::new(sn(5), 1).hash());
        assert_eq!(d.root(), expect);
        assert_eq!(d.serials_in_order(), &[sn(5), sn(2)]);
    }

    #[test]
    fn duplicates_rejected() {
        let d = Dictionary::new(CaId::from_u64(1)).insert(&[sn(5)]).unwrap();
        assert!(matches!(d.insert(&[sn(5)]), Err(DictError::DuplicateSerial(_))));
        assert!(matches!(d.insert(&[sn(7), sn(7)]), Err(DictError::DuplicateSerial(_))));
    }

    #[test]
    fn batching_does_not_change_root() {
        let serials: Vec<_> = [9u64, 1, 300, 44, 2, 70000, 12].iter().map(|v| sn(*v)).collect();
        let one = Dictionary::from_serials(CaId::from_u64(1), &serials).unwrap();
        let mut inc = Dictionary::new(CaId::from_u64(1));
        for chunk in serials.chunks(3) {
            inc = inc.insert(chunk).unwrap();
        }
        assert_eq!(one.root(), inc.root());
    }

    #[test]
    fn storage_round_trip() {
        let serials: Vec<_> = (1..50u64).map(|v| sn(v * 7919)).collect();
        let d = Dictionary::from_serials(CaId::from_u64(3), &serials).unwrap();
        let bytes = d.to_storage_bytes();
        let back = Dictionary::from_storage_bytes(&bytes).unwrap();
        assert_eq!(back.root(), d.root());
        assert_eq!(back.serials_in_order(), d.serials_in_order());
    }

    fn ca_setup() -> (CaSigningKey, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (CaSigningKey::generate(&mut rng), rng)
    }

    #[test]
    fn update_accepts_honest_batch() {
        let (key, mut rng) = ca_setup();
        let id = CaId::from_u64(1);
        let base = Dictionary::from_serials(id, &[sn(1), sn(2)]).unwrap();
        let (sr0, _) = make_signed_root(&key, &base, 100, 10, &mut rng);
        let ca_next = base.insert(&[sn(9)]).unwrap();
        let (sr1, _) = make_signed_root(&key, &ca_next, 110, 10, &mut rng);
        let replica = update(&base, Some(&sr0), &[sn(9)], &sr1, &key.public(), 110).unwrap();
        assert_eq!(replica.root(), ca_next.root());
        // append-only: prior sequence is a prefix
        assert_eq!(&replica.serials_in_order()[..2], base.serials_in_order());
    }

    #[test]
    fn update_rejections() {
        let (key, mut rng) = ca_setup();
        let id = CaId::from_u64(1);
        let base = Dictionary::from_serials(id, &[sn(1)]).unwrap();
        let (sr0, _) = make_signed_root(&key, &base, 100, 10, &mut rng);
        let honest = base.insert(&[sn(4)]).unwrap();
        let (sr1, _) = make_signed_root(&key, &honest, 110, 10, &mut rng);
        let pk = key.public();

        // count off by one
        let mut bad_n = sr1.clone();
        bad_n.n += 1;
        let bad_n = SignedRoot::sign(&key, id, bad_n.root, bad_n.n, bad_n.anchor, bad_n.timestamp);
        assert!(matches!(
            update(&base, Some(&sr0), &[sn(4)], &bad_n, &pk, 110),
            Err(UpdateError::CountMismatch { .. })
        ));
        // root over a different serial
        assert_eq!(update(&base, Some(&sr0), &[sn(5)], &sr1, &pk, 110).unwrap_err(), UpdateError::RootMismatch);
        // forged signature
        let mut forged = sr1.clone();
        forged.signature[0] ^= 1;
        assert_eq!(update(&base, Some(&sr0), &[sn(4)], &forged, &pk, 110).unwrap_err(), UpdateError::BadSignature);
        // older than current
        assert_eq!(update(&base, Some(&sr1), &[sn(4)], &sr0, &pk, 110).unwrap_err(), UpdateError::StaleTimestamp);
        // far future
        assert_eq!(
            update(&base, Some(&sr0), &[sn(4)], &sr1, &pk, 110 - MAX_CLOCK_SKEW - 1).unwrap_err(),
            UpdateError::FutureTimestamp
        );
        // input replica is untouched
        assert_eq!(base.len(), 1);
    }

    #[test]
    fn prove_requires_matching_root() {
        let (key, mut rng) = ca_setup();
        let d = Dictionary::from_serials(CaId::from_u64(1), &[sn(2), sn(5)]).unwrap();
        let (sr, _) = make_signed_root(&key, &d, 0, 4, &mut rng);
        let fs = FreshnessStatement { value: sr.anchor };
        let other = d.insert(&[sn(8)]).unwrap();
        assert_eq!(other.prove(&sn(3), &sr, &fs).unwrap_err(), DictError::DictRootMismatch);
    }

    #[test]
    fn prove_shapes() {
        let (key, mut rng) = ca_setup();
        let d = Dictionary::from_serials(CaId::from_u64(1), &[sn(2), sn(5)]).unwrap();
        let (sr, _) = make_signed_root(&key, &d, 0, 4, &mut rng);
        let fs = FreshnessStatement { value: sr.anchor };

        let present = d.prove(&sn(5), &sr, &fs).unwrap();
        assert_eq!(present.proof.kind, ProofKind::Present);
        assert_eq!(present.proof.leaves, vec![Leaf::new(sn(5), 2)]);
        assert_eq!(crate::authdict::tree::position_from_path(2, &present.proof.paths[0]), Some(1));

        let absent = d.prove(&sn(3), &sr, &fs).unwrap();
        assert_eq!(absent.proof.kind, ProofKind::Absent);
        assert_eq!(absent.proof.leaves, vec![Leaf::new(sn(2), 1), Leaf::new(sn(5), 2)]);
        assert_eq!(crate::authdict::tree::position_from_path(2, &absent.proof.paths[0]), Some(0));

        let empty = Dictionary::new(CaId::from_u64(1));
        let (sr0, _) = make_signed_root(&key, &empty, 0, 4, &mut rng);
        let st = empty.prove(&sn(3), &sr0, &FreshnessStatement { value: sr0.anchor }).unwrap();
        assert!(st.proof.leaves.is_empty() && st.proof.paths.is_empty());
    }
}
