@ProblemName uni
@UNIVARIATE TRUE
@classlabel TRUE A B
@DATA
1,2,3:A
3,2,1:B
