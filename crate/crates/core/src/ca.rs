//! Certification authority side of the dictionary protocol: revokes in
//! batches, refreshes every Δ, and rolls the hash chain over when spent.

use rand::{CryptoRng, RngCore};

use crate::authdict::{
    make_signed_root, refresh, CaId, CaPublicKey, CaSigningKey, DictError, Dictionary, FreshnessStatement,
    HashChainSecret, Refresh, SerialNumber, SignedRoot,
};
use crate::dissemination::{FreshnessMessage, IssuanceMessage, Publication};

#[derive(Clone, Debug)]
pub struct CertificateAuthority {
    ca_id: CaId,
    key: CaSigningKey,
    delta: u64,
    chain_length: u64,
    dict: Dictionary,
    signed_root: SignedRoot,
    secret: HashChainSecret,
}

impl CertificateAuthority {
    /// Creates the CA with an empty dictionary. The returned re-anchor
    /// message carries the initial (n = 0) signed root.
    pub fn new<R: RngCore + CryptoRng>(
        ca_id: CaId,
        key: CaSigningKey,
        delta: u64,
        chain_length: u64,
        now: u64,
        rng: &mut R,
    ) -> (Self, IssuanceMessage) {
        assert!(delta > 0, "delta must be positive");
        let dict = Dictionary::new(ca_id);
        let (signed_root, secret) = make_signed_root(&key, &dict, now, chain_length, rng);
        let ca = CertificateAuthority {
            ca_id,
            key,
            delta,
            chain_length,
            dict,
            signed_root: signed_root.clone(),
            secret,
        };
        let msg = IssuanceMessage {
            ca_id,
            serials: Vec::new(),
            signed_root,
        };
        (ca, msg)
    }

    pub fn ca_id(&self) -> CaId {
        self.ca_id
    }

    pub fn public_key(&self) -> CaPublicKey {
        self.key.public()
    }

    pub fn signing_key(&self) -> &CaSigningKey {
        &self.key
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn signed_root(&self) -> &SignedRoot {
        &self.signed_root
    }

    /// Inserts a batch and signs the new root with a fresh chain.
    pub fn revoke<R: RngCore + CryptoRng>(
        &mut self,
        serials: &[SerialNumber],
        now: u64,
        rng: &mut R,
    ) -> Result<IssuanceMessage, DictError> {
        let next = self.dict.insert(serials)?;
        let (sr, secret) = make_signed_root(&self.key, &next, now, self.chain_length, rng);
        self.dict = next;
        self.signed_root = sr.clone();
        self.secret = secret;
        Ok(IssuanceMessage {
            ca_id: self.ca_id,
            serials: serials.to_vec(),
            signed_root: sr,
        })
    }

    /// Current freshness statement, or a re-anchor once the chain is spent.
    pub fn refresh<R: RngCore + CryptoRng>(&mut self, now: u64, rng: &mut R) -> Publication {
        match refresh(&self.secret, &self.signed_root, now, self.delta) {
            Refresh::Statement(statement) => Publication::Freshness(FreshnessMessage {
                ca_id: self.ca_id,
                statement,
            }),
            Refresh::NeedNewRoot => {
                let (sr, secret) = make_signed_root(&self.key, &self.dict, now, self.chain_length, rng);
                self.signed_root = sr.clone();
                self.secret = secret;
                Publication::Issuance(IssuanceMessage {
                    ca_id: self.ca_id,
                    serials: Vec::new(),
                    signed_root: sr,
                })
            }
        }
    }

    /// Statement for the current period without any side effects, if the
    /// chain still covers `now`.
    pub fn statement_at(&self, now: u64) -> Option<FreshnessStatement> {
        match refresh(&self.secret, &self.signed_root, now, self.delta) {
            Refresh::Statement(s) => Some(s),
            Refresh::NeedNewRoot => None,
        }
    }
}
