pub mod config; pub mod experiment; pub mod oracle; pub mod report; pub mod trial;
