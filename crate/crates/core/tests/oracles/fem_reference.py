import numpy as np
np.set_printoptions(precision=17)

def ke_quadrature(nu):
    # Q4 plane stress, unit square, E=1, 2x2 Gauss, node order BL,BR,TR,TL
    D = 1/(1-nu**2)*np.array([[1,nu,0],[nu,1,0],[0,0,(1-nu)/2]])
    g = 1/np.sqrt(3)
    xi_n = [-1,1,1,-1]; eta_n=[-1,-1,1,1]
    K = np.zeros((8,8))
    for xi in (-g,g):
        for eta in (-g,g):
            B = np.zeros((3,8))
            for a in range(4):
                dNdxi = 0.25*xi_n[a]*(1+eta_n[a]*eta)
                dNdeta = 0.25*eta_n[a]*(1+xi_n[a]*xi)
                # unit square: x = (xi+1)/2 -> d/dx = 2 d/dxi
                dx = 2*dNdxi; dy = 2*dNdeta
                B[0,2*a]=dx; B[1,2*a+1]=dy; B[2,2*a]=dy; B[2,2*a+1]=dx
            K += B.T@D@B*0.25  # detJ = 1/4, weights 1
    return K

def edofs(nelx,nely):
    ed=[]
    for ex in range(nelx):
        for ey in range(nely):  # ey from top
            n1=(nely+1)*ex+ey; n2=(nely+1)*(ex+1)+ey
            ed.append([2*n1+2,2*n1+3,2*n2+2,2*n2+3,2*n2,2*n2+1,2*n1,2*n1+1])
    return np.array(ed)

def solve(nelx,nely,xphys,fixed,F,penal=3,E0=1.0,Emin=1e-9,nu=0.3):
    KE=ke_quadrature(nu); ed=edofs(nelx,nely); ndof=2*(nelx+1)*(nely+1)
    K=np.zeros((ndof,ndof))
    for e in range(nelx*nely):
        E=Emin+xphys[e]**penal*(E0-Emin)
        K[np.ix_(ed[e],ed[e])]+=E*KE
    free=np.setdiff1d(np.arange(ndof),fixed)
    U=np.zeros(ndof)
    U[free]=np.linalg.solve(K[np.ix_(free,free)],F[free])
    ce=np.array([U[ed[e]]@KE@U[ed[e]] for e in range(nelx*nely)])
    Ee=Emin+xphys**penal*(E0-Emin)
    return U,float((Ee*ce).sum()),ce

def cantilever_tip(nelx,nely):
    # right wall fixed, downward unit load at top-left node
    ndof=2*(nelx+1)*(nely+1)
    fixed=[]
    for iy in range(nely+1):
        n=(nely+1)*nelx+iy; fixed+= [2*n,2*n+1]
    F=np.zeros(ndof); F[1]=-1.0
    return np.array(fixed),F

if __name__=="__main__":
    K=ke_quadrature(0.3)
    print("KE row0", K[0])
    nelx,nely=60,20
    fixed,F=cantilever_tip(nelx,nely)
    U,c,_=solve(nelx,nely,np.ones(nelx*nely),fixed,F)
    print("cmin 60x20 cantilever_tip", repr(c))
    U,c,_=solve(nelx,nely,np.full(nelx*nely,0.5),fixed,F)
    print("c uniform 0.5 60x20", repr(c))
