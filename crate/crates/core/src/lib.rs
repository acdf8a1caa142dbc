pub mod conjugacy;
pub mod free_words;
pub mod graph_of_groups;
pub mod perm;
pub mod presentation;
pub mod quotients;
pub mod rips;
pub mod small_cancellation;
pub mod stallings;
