mod support;

use proptest::prelude::*;
use reliefchain_core::forensics::rlp::{decode, encode, minimal_be, RlpItem};
use reliefchain_core::forensics::{decode_blob, encode_blob, forensics_hash, identity_bytes};
use reliefchain_core::{Address, Hash32};

fn hashes() -> impl Strategy<Value = Vec<Hash32>> {
    prop::collection::vec(any::<[u8; 32]>().prop_map(Hash32), 0..6)
}

proptest! {
    #![proptest_config(support::proptest_config(2000))]

    #[test]
    fn round_trip(x in support::rlp_item()) {
        prop_assert_eq!(decode(&encode(&x)), Ok(x));
    }

    #[test]
    fn injective(a in support::rlp_item(), b in support::rlp_item()) {
        prop_assert_eq!(a == b, encode(&a) == encode(&b));
    }

    #[test]
    fn decode_accepts_only_canonical(bytes in prop::collection::vec(any::<u8>(), 0..80)) {
        if let Ok(x) = decode(&bytes) {
            prop_assert_eq!(encode(&x), bytes);
        }
    }

    #[test]
    fn uints_are_minimal(v in any::<u64>()) {
        let it = RlpItem::uint(v);
        prop_assert_eq!(it.as_uint(), Ok(v));
        prop_assert_eq!(decode(&encode(&it)).unwrap().as_uint(), Ok(v));
        prop_assert!(minimal_be(v).first() != Some(&0));
    }

    #[test]
    fn identity_and_hash_injective(
        d1 in any::<[u8; 20]>(), n1 in any::<u64>(), c1 in hashes(),
        d2 in any::<[u8; 20]>(), n2 in any::<u64>(), c2 in hashes(),
    ) {
        let (a1, a2) = (Address(d1), Address(d2));
        prop_assert_eq!((a1, n1) == (a2, n2), identity_bytes(&a1, n1) == identity_bytes(&a2, n2));
        prop_assert_eq!((a1, n1, &c1) == (a2, n2, &c2), forensics_hash(&a1, n1, &c1) == forensics_hash(&a2, n2, &c2));
    }

    #[test]
    fn blob_round_trip(c in hashes(), extra in 1usize..40) {
        let blob = encode_blob(&c);
        prop_assert_eq!(decode_blob(&blob), Some(c.clone()));
        let mut longer = blob.clone();
        longer.extend(std::iter::repeat_n(0, extra));
        prop_assert_eq!(decode_blob(&longer), None);
    }
}
